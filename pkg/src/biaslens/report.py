"""Assemble pipeline outputs into a report bundle and serialize it.

CSV is the human-facing surface, JSON the machine-facing one. Every float
is written with 6 decimals (round-half-even on its shortest repr) so runs
diff cleanly.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .bias_detector import (
    BiasClass,
    ClassifiedKeyword,
    DetectionReport,
    DetectorConfig,
    category_series,
    run_detection,
)
from .errors import InsufficientData, ZeroVariance
from .keyword_index import KeywordIndex
from .log_model import (
    AXIS_VALUES,
    Action,
    ActionRatioTable,
    AttributePair,
    Axis,
    Dataset,
    action_ratio_table,
    shares_from_totals,
)
from .stats_core import pearson, spearman

_SIX = Decimal("0.000001")


def fmt6(x: float) -> str:
    d = Decimal(repr(float(x))).quantize(_SIX, rounding=ROUND_HALF_EVEN)
    if d.is_zero():
        d = abs(d)
    return f"{d:.6f}"


def round6(x: float | None) -> float | None:
    return None if x is None else float(fmt6(x))


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return fmt6(x)
    return str(x)


@dataclass(frozen=True)
class CorrelationEntry:
    category: str
    pair: AttributePair
    action: Action
    n: int
    pearson: float | None
    spearman: float | None


@dataclass(frozen=True)
class ScatterSeries:
    category: str
    pair: AttributePair
    action: Action
    rows: tuple[tuple[str, float, float], ...]  # (article_id, x_norm, y_norm)


@dataclass
class ReportBundle:
    categories: tuple[str, ...]
    pairs: tuple[AttributePair, ...]
    config: Mapping
    action_ratios: dict[str, ActionRatioTable]
    correlations: list[CorrelationEntry]
    keyword_indices: dict[str, KeywordIndex]
    detections: dict[str, DetectionReport]
    scatter: list[ScatterSeries]
    manifest: dict = field(default_factory=dict)

    @property
    def classified(self) -> list[ClassifiedKeyword]:
        return [c for cat in self.categories for c in self.detections[cat].classified]

    def keyword_counts(self) -> dict[tuple[str, AttributePair, Action], int]:
        return {(cat, cell.pair, cell.action): cell.n_kept
                for cat in self.categories for cell in self.detections[cat].cells}


def _scatter_and_correlation(dataset: Dataset, pair: AttributePair, action: Action,
                             config: DetectorConfig) -> tuple[ScatterSeries, CorrelationEntry]:
    series = category_series(dataset.counts, (pair.first, pair.second), (action,), config)
    ys, xs = series[(pair.first, action)], series[(pair.second, action)]
    if ys is None or xs is None:
        rows = ()
    else:
        rows = tuple((a, xs.values[a], ys.values[a])
                     for a in dataset.article_ids if a in ys.values and a in xs.values)
    r = rho = None
    if len(rows) >= 2:
        x = [row[1] for row in rows]
        y = [row[2] for row in rows]
        raw_x = [dataset.counts.get(a, pair.second, action) for a, _, _ in rows]
        raw_y = [dataset.counts.get(a, pair.first, action) for a, _, _ in rows]
        try:
            r = pearson(x, y)
        except (ZeroVariance, InsufficientData):
            pass
        try:
            rho = spearman(raw_x, raw_y)
        except (ZeroVariance, InsufficientData):
            pass
    scatter = ScatterSeries(dataset.category, pair, action, rows)
    corr = CorrelationEntry(dataset.category, pair, action, len(rows), r, rho)
    return scatter, corr


def build_bundle(
    datasets: Sequence[Dataset],
    indices: Mapping[str, KeywordIndex],
    pairs: Sequence[AttributePair],
    config: DetectorConfig,
    run_config: Mapping | None = None,
) -> ReportBundle:
    categories = tuple(d.category for d in datasets)
    ratios, detections, scatter, corrs = {}, {}, [], []
    for ds in datasets:
        ratios[ds.category] = action_ratio_table(ds)
        detections[ds.category] = run_detection(ds, indices[ds.category], pairs, config)
        for pair in pairs:
            for action in Action:
                s, c = _scatter_and_correlation(ds, pair, action, config)
                scatter.append(s)
                corrs.append(c)
    return ReportBundle(categories, tuple(pairs), dict(run_config or {}), ratios, corrs,
                        dict(indices), detections, scatter)


# --------------------------------------------------------------------------- tables

def _csv_text(rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _pooled_ratios(bundle: ReportBundle) -> dict[tuple[Axis, Action], dict]:
    pooled = {}
    for key in next(iter(bundle.action_ratios.values())).totals:
        totals = {}
        for table in bundle.action_ratios.values():
            for value, n in table.totals[key].items():
                totals[value] = totals.get(value, 0) + n
        pooled[key] = shares_from_totals(totals)
    return pooled


def action_ratio_rows(bundle: ReportBundle) -> list[list]:
    """Article counts, then click and like shares per axis value, one column per category."""
    cats = bundle.categories
    pooled = _pooled_ratios(bundle)
    rows = [["section", "axis", "value", "all", *cats],
            ["number of news articles", "", "", None,
             *[bundle.action_ratios[c].n_articles for c in cats]]]
    for action in Action:
        for axis in Axis:
            for value in AXIS_VALUES[axis]:
                rows.append([f"{action.value} ratio", axis.value, value.value, pooled[(axis, action)][value],
                             *[bundle.action_ratios[c].shares[(axis, action)][value] for c in cats]])
    return rows


def _pair_action_header(cats: Sequence[str]) -> list[str]:
    return ["axis", "pair", *[f"{a.value}:{c}" for a in Action for c in cats]]


def correlation_rows(bundle: ReportBundle, method: str) -> list[list]:
    lookup = {(e.category, e.pair, e.action): e for e in bundle.correlations}
    rows = [_pair_action_header(bundle.categories)]
    for pair in bundle.pairs:
        values = [getattr(lookup[(cat, pair, action)], method)
                  for action in Action for cat in bundle.categories]
        if all(v is None for v in values):
            continue  # pair absent from the data: omit rather than print blanks
        rows.append([pair.axis.value, pair.title, *values])
    return rows


def keyword_count_rows(bundle: ReportBundle) -> list[list]:
    counts = bundle.keyword_counts()
    rows = [_pair_action_header(bundle.categories)]
    for pair in bundle.pairs:
        rows.append([pair.axis.value, pair.title,
                     *[counts[(c, pair, a)] for a in Action for c in bundle.categories]])
    return rows


def biased_keyword_rows(bundle: ReportBundle, stage: str) -> list[list]:
    """Keywords outside the intercept (``stage="intercept"``) or slope band, per pair and side."""
    upper = BiasClass.UPPER_INTERCEPT if stage == "intercept" else BiasClass.UPPER_SLOPE
    lower = BiasClass.LOWER_INTERCEPT if stage == "intercept" else BiasClass.LOWER_SLOPE
    cats = bundle.categories
    grouped: dict[tuple, list[str]] = {}
    for c in bundle.classified:
        grouped.setdefault((c.category, c.pair, c.action, c.bias_class), []).append(c.keyword)
    rows = [["pair", "class", *[f"{c}:{a.value}" for c in cats for a in Action]]]
    for pair in bundle.pairs:
        for cls, side, toward in ((upper, "upper", pair.first), (lower, "lower", pair.second)):
            row = [pair.title, f"{side} (biased to {toward.value})"]
            for cat in cats:
                for action in Action:
                    row.append("; ".join(sorted(grouped.get((cat, pair, action, cls), []))))
            rows.append(row)
    return rows


def regression_rows(bundle: ReportBundle) -> list[list]:
    rows = [["category", "pair", "action", "keyword", "class", "biased_toward",
             "n_articles", "slope", "intercept", "r_squared", "pearson_r"]]
    for c in bundle.classified:
        a = c.analysis
        rows.append([c.category, c.pair.label, c.action.value, c.keyword, c.bias_class.value,
                     c.biased_toward.value if c.biased_toward else "",
                     a.n_articles if a else None, a.slope if a else None,
                     a.intercept if a else None, a.r_squared if a else None,
                     a.pearson_r if a else None])
    return rows


def keyword_rows(bundle: ReportBundle) -> list[list]:
    rows = [["category", "rank", "keyword", "document_frequency"]]
    for cat in bundle.categories:
        for rank, (kw, df) in enumerate(bundle.keyword_indices[cat].keywords, start=1):
            rows.append([cat, rank, kw, df])
    return rows


def scatter_filename(s: ScatterSeries) -> str:
    safe = re.sub(r"[^\w.-]+", "_", s.category)
    return f"scatter_{safe}_{s.action.value}_{s.pair.label}.csv"


def scatter_text(s: ScatterSeries) -> str:
    head = (f"# category={s.category} action={s.action.value} pair={s.pair.label} "
            f"y={s.pair.first.value} x={s.pair.second.value}\n")
    return head + _csv_text([["article_id", "x_norm", "y_norm"], *s.rows])


def read_scatter(path: str | Path) -> list[tuple[str, float, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return [(r["article_id"], float(r["x_norm"]), float(r["y_norm"])) for r in reader]


# --------------------------------------------------------------------------- JSON

def classified_to_json(c: ClassifiedKeyword) -> dict:
    a = c.analysis
    return {
        "category": c.category,
        "pair": c.pair.label,
        "action": c.action.value,
        "keyword": c.keyword,
        "class": c.bias_class.value,
        "biased_toward": c.biased_toward.value if c.biased_toward else None,
        "n_articles": a.n_articles if a else None,
        "slope": round6(a.slope) if a else None,
        "intercept": round6(a.intercept) if a else None,
        "r_squared": round6(a.r_squared) if a else None,
        "pearson_r": round6(a.pearson_r) if a else None,
    }


def _band_json(band) -> dict | None:
    if band is None:
        return None
    return {"mean": round6(band.stats.mean), "std": round6(band.stats.std), "n": band.stats.n,
            "lower": round6(band.lower), "upper": round6(band.upper),
            "degenerate_spread": band.degenerate_spread}


def bundle_to_json(bundle: ReportBundle) -> dict:
    pooled = _pooled_ratios(bundle)

    def ratio_block(shares, n_articles=None):
        out = {"n_articles": n_articles} if n_articles is not None else {}
        for action in Action:
            out[action.value] = {axis.value: {v.value: round6(shares[(axis, action)][v])
                                              for v in AXIS_VALUES[axis]} for axis in Axis}
        return out

    thresholds = []
    for cat in bundle.categories:
        for cell in bundle.detections[cat].cells:
            t = cell.thresholds
            thresholds.append({
                "category": cat, "pair": cell.pair.label, "action": cell.action.value,
                "fitted": len(cell.analyses), "kept": cell.n_kept,
                "insufficient_data": len(cell.insufficient),
                "intercept_band": _band_json(t.intercept if t else None),
                "slope_band": _band_json(t.slope if t else None),
            })
    return {
        "tool": {"name": "biaslens", "version": __version__},
        "config": bundle.config,
        "categories": list(bundle.categories),
        "pairs": [p.label for p in bundle.pairs],
        "action_ratios": {
            "all": ratio_block(pooled),
            **{c: ratio_block(bundle.action_ratios[c].shares, bundle.action_ratios[c].n_articles)
               for c in bundle.categories},
        },
        "correlations": [
            {"category": e.category, "pair": e.pair.label, "action": e.action.value, "n": e.n,
             "pearson": round6(e.pearson), "spearman": round6(e.spearman)}
            for e in bundle.correlations
        ],
        "keyword_counts": thresholds,
        "keywords": {c: [[k, df] for k, df in bundle.keyword_indices[c].keywords]
                     for c in bundle.categories},
        "classified_keywords": [classified_to_json(c) for c in bundle.classified],
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------- writers

def emit_action_ratio_table(bundle: ReportBundle) -> dict[str, str]:
    return {"action_ratios.csv": _csv_text(action_ratio_rows(bundle))}


def emit_correlation_tables(bundle: ReportBundle, formats: Iterable[str] = ("csv", "json")) -> dict[str, str]:
    """Pearson (normalized counts) and Spearman (raw counts) tables, pair rows by action x category."""
    formats = set(formats)
    out = {}
    if "csv" in formats:
        out["correlation_pearson.csv"] = _csv_text(correlation_rows(bundle, "pearson"))
        out["correlation_spearman.csv"] = _csv_text(correlation_rows(bundle, "spearman"))
    if "json" in formats:
        out["correlations.json"] = _dump_json(bundle_to_json(bundle)["correlations"])
    return out


def emit_scatter_data(bundle: ReportBundle) -> dict[str, str]:
    return {f"scatter/{scatter_filename(s)}": scatter_text(s) for s in bundle.scatter}


def render_bundle(bundle: ReportBundle, formats: Iterable[str] = ("csv", "json")) -> dict[str, str]:
    """Relative path -> file content for every output of the bundle (manifest excluded)."""
    formats = set(formats)
    files: dict[str, str] = {}
    if "csv" in formats:
        files.update(emit_action_ratio_table(bundle))
        files["keyword_counts.csv"] = _csv_text(keyword_count_rows(bundle))
        files["biased_keywords_intercept.csv"] = _csv_text(biased_keyword_rows(bundle, "intercept"))
        files["biased_keywords_slope.csv"] = _csv_text(biased_keyword_rows(bundle, "slope"))
        files["keyword_regressions.csv"] = _csv_text(regression_rows(bundle))
        files["keywords.csv"] = _csv_text(keyword_rows(bundle))
    files.update(emit_correlation_tables(bundle, formats))
    if "json" in formats:
        doc = bundle_to_json(bundle)
        files["report.json"] = _dump_json(doc)
        files["classified_keywords.json"] = _dump_json(doc["classified_keywords"])
    files.update(emit_scatter_data(bundle))
    return files


def write_files(files: Mapping[str, str], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for rel, text in sorted(files.items()):
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    return written
