"""``biaslens`` command line: ``analyze``, ``synth`` and ``evaluate``.

Exit codes for ``analyze``: 0 success, 1 input/config error, 2 empty dataset.
Set ``BIASLENS_LOG_LEVEL`` (e.g. ``DEBUG``) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .bias_detector import DetectorConfig
from .errors import BiasLensError, ConfigInvalid, EmptyDataset
from .keyword_index import load_stopwords, select_keywords
from .log_model import CANONICAL_PAIRS, Action, AttributePair, build_dataset, load_articles, load_events
from .report import build_bundle, render_bundle, write_files
from .synth import GroundTruth, SynthConfig, evaluate_detection, generate_dataset, overall_score

logger = logging.getLogger("biaslens")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _pairs(text: str) -> list[AttributePair]:
    try:
        return [AttributePair.parse(t) for t in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biaslens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"biaslens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full pipeline on an events + articles log")
    a.add_argument("--events", required=True, help="events file (.jsonl or .csv)")
    a.add_argument("--articles", required=True, help="article catalog (.jsonl or .csv)")
    a.add_argument("--category", required=True, type=_csv_list,
                   help="category to analyze; comma-separate several, e.g. politics,society")
    a.add_argument("--min-clicks", type=int, default=100,
                   help="keep articles with strictly more total clicks than this")
    a.add_argument("--top-keywords", type=int, default=100)
    a.add_argument("--r2-threshold", type=float, default=0.5)
    a.add_argument("--sigma-mult", type=float, default=2.0)
    a.add_argument("--min-articles-per-keyword", type=int, default=3)
    a.add_argument("--zero-policy", choices=("drop", "add_one"), default="drop")
    a.add_argument("--std-mode", choices=("population", "sample"), default="population")
    a.add_argument("--stopwords", help="stopword file, one token per line, '#' comments")
    a.add_argument("--dedup-users", type=_bool, default=False, metavar="{true,false}",
                   help="count a user's repeated action on an article once")
    a.add_argument("--pairs", type=_pairs, default=list(CANONICAL_PAIRS),
                   help="ordered attribute pairs, default male-female,young-middle,middle-older,older-young")
    a.add_argument("--skip-invalid", action="store_true",
                   help="drop malformed input lines instead of failing")
    a.add_argument("--output", required=True, help="output directory")
    a.add_argument("--format", type=_csv_list, default=["csv", "json"], help="csv,json")

    s = sub.add_parser("synth", help="generate a synthetic log with planted biases")
    s.add_argument("--config", required=True, help="JSON synth config")
    s.add_argument("--output", required=True)
    s.add_argument("--seed", type=int, help="override the config seed")

    e = sub.add_parser("evaluate", help="score detections against a ground truth file")
    e.add_argument("--detected", required=True, help="classified_keywords.json or report.json")
    e.add_argument("--truth", required=True, help="ground_truth.json")
    e.add_argument("--json", action="store_true", help="print scores as JSON")
    return parser


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _publish(files: dict[str, str], output: Path) -> None:
    """Write into a scratch directory first so a failure leaves no partial output."""
    output.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{output.name}.", dir=output.parent))
    try:
        write_files(files, tmp)
        output.mkdir(exist_ok=True)
        for path in sorted(tmp.rglob("*")):
            if path.is_file():
                dest = output / path.relative_to(tmp)
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(path, dest)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def run_pipeline(args: argparse.Namespace) -> int:
    formats = set(args.format)
    if not formats <= {"csv", "json"}:
        logger.error("cli_report: --format accepts csv and/or json, got %s", ",".join(args.format))
        return EXIT_INPUT
    for label, path in (("events", args.events), ("articles", args.articles), ("stopwords", args.stopwords)):
        if path is not None and not Path(path).is_file():
            logger.error("log_model: %s file not found: %s", label, path)
            return EXIT_INPUT
    try:
        config = DetectorConfig(
            r2_threshold=args.r2_threshold,
            sigma_multiplier=args.sigma_mult,
            min_articles_per_keyword=args.min_articles_per_keyword,
            std_mode=args.std_mode,
            zero_policy=args.zero_policy,
        )
        if args.min_clicks < 0 or args.top_keywords < 1:
            raise ConfigInvalid({"min_clicks/top_keywords": "min_clicks >= 0 and top_keywords >= 1"})
        articles = load_articles(args.articles)
        events = load_events(args.events)
    except (ConfigInvalid, UnicodeDecodeError) as exc:
        logger.error("cli_report: %s", exc)
        return EXIT_INPUT
    bad = list(articles.errors) + list(events.errors)
    if bad and not args.skip_invalid:
        for err in bad[:20]:
            logger.error("log_model: %s", err)
        logger.error("log_model: %d malformed line(s); rerun with --skip-invalid to drop them", len(bad))
        return EXIT_INPUT

    stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    datasets, indices = [], {}
    try:
        for category in args.category:
            ds = build_dataset(events.records, articles.records, category,
                               args.min_clicks, dedup_users=args.dedup_users)
            datasets.append(ds)
            indices[category] = select_keywords(ds.catalog, stopwords=stopwords, top_n=args.top_keywords)
            logger.info("log_model: %s: %d article(s) retained", category, len(ds))
    except EmptyDataset as exc:
        logger.error("log_model: %s", exc)
        return EXIT_EMPTY

    run_config = {
        "categories": args.category,
        "min_clicks": args.min_clicks,
        "top_keywords": args.top_keywords,
        "r2_threshold": args.r2_threshold,
        "sigma_multiplier": args.sigma_mult,
        "min_articles_per_keyword": args.min_articles_per_keyword,
        "zero_policy": args.zero_policy,
        "std_mode": args.std_mode,
        "dedup_users": args.dedup_users,
        "pairs": [p.label for p in args.pairs],
        "stopwords": sorted(stopwords),
        "skip_invalid": args.skip_invalid,
    }
    bundle = build_bundle(datasets, indices, args.pairs, config, run_config)
    files = render_bundle(bundle, formats)
    inputs = {"events": args.events, "articles": args.articles}
    if args.stopwords:
        inputs["stopwords"] = args.stopwords
    manifest = {
        "tool": "biaslens",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": run_config,
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items()},
        "rejected_lines": len(bad),
        "datasets": {
            ds.category: {"articles": len(ds), **vars(ds.diagnostics)} for ds in datasets
        },
    }
    files["manifest.json"] = json.dumps(manifest, indent=2) + "\n"
    try:
        _publish(files, Path(args.output))
    except OSError as exc:
        logger.error("cli_report: cannot write output: %s", exc)
        return EXIT_INPUT
    n_biased = sum(1 for c in bundle.classified if c.bias_class.is_biased)
    print(f"analyzed {', '.join(args.category)}: {n_biased} biased keyword cell(s); "
          f"{len(files)} file(s) written to {args.output}")
    return EXIT_OK


def run_synth(args: argparse.Namespace) -> int:
    try:
        config = SynthConfig.load(args.config)
        if args.seed is not None:
            config = SynthConfig.from_dict({**config.to_dict(), "seed": args.seed})
    except (OSError, json.JSONDecodeError, ConfigInvalid) as exc:
        logger.error("synth: %s", exc)
        return EXIT_INPUT
    out = generate_dataset(config, args.output)
    print(f"wrote {out.n_events} events over {out.n_articles} articles to {args.output}")
    return EXIT_OK


def _load_detected(path: str) -> list[tuple]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc["classified_keywords"]
    out = []
    for rec in doc:
        if rec.get("biased_toward"):
            pair = AttributePair.parse(rec["pair"])
            toward = pair.first if rec["biased_toward"] == pair.first.value else pair.second
            out.append((rec["keyword"], pair, Action(rec["action"]), toward))
    return out


def run_evaluate(args: argparse.Namespace) -> int:
    try:
        detected = _load_detected(args.detected)
        truth = GroundTruth.load(args.truth)
    except (OSError, KeyError, ValueError) as exc:
        logger.error("evaluate: %s", exc)
        return EXIT_INPUT
    scores = evaluate_detection(detected, truth)
    overall = {a: overall_score(detected, truth, a) for a in Action}
    if args.json:
        doc = {
            "cells": [{"pair": p.label, "action": a.value, **vars(s)} for (p, a), s in scores.items()],
            "overall": {a.value: vars(s) for a, s in overall.items()},
        }
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(f"{'pair':<14} {'action':<6} {'precision':>9} {'recall':>7} {'tp':>4} {'det':>4} {'truth':>5}")
    for (pair, action), s in scores.items():
        print(f"{pair.label:<14} {action.value:<6} {s.precision:>9.3f} {s.recall:>7.3f} "
              f"{s.true_positives:>4} {s.n_detected:>4} {s.n_truth:>5}")
    for action, s in overall.items():
        print(f"{'overall':<14} {action.value:<6} {s.precision:>9.3f} {s.recall:>7.3f} "
              f"{s.true_positives:>4} {s.n_detected:>4} {s.n_truth:>5}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("BIASLENS_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return run_pipeline(args)
        if args.command == "synth":
            return run_synth(args)
        return run_evaluate(args)
    except BiasLensError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
