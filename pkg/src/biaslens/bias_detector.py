"""Per-keyword regression between attribute pairs and mean +/- k*sigma banding.

For each (attribute pair, action) cell of a category dataset, every keyword
gets a least-squares fit of the first attribute's normalized counts (y)
against the second's (x) over the articles whose title contains it. Fits
with R^2 at or below the threshold are dropped. The remaining intercepts
are banded at ``mean +/- m*sigma``; keywords strictly outside the band are
intercept-biased. Keywords inside it are banded again on their slopes, with
the slope statistics taken over that middle set only.

A low intercept (or slope) means the second attribute over-consumes the
keyword relative to the first, so it is reported as biased toward
``pair.second``; a high one as biased toward ``pair.first``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ConfigInvalid, EmptyInput, InsufficientData, ZeroVariance, ZeroVarianceX
from .keyword_index import KeywordIndex
from .log_model import (
    CANONICAL_PAIRS,
    Action,
    AttributePair,
    AttributeValue,
    CountsMatrix,
    Dataset,
)
from .stats_core import (
    STD_MODES,
    ZERO_POLICIES,
    NormalizedSeries,
    RegressionResult,
    SummaryStats,
    log_minmax_normalize,
    mean_and_std,
    ols_fit,
    pearson,
)


class BiasClass(str, Enum):
    UPPER_INTERCEPT = "upper_intercept"
    LOWER_INTERCEPT = "lower_intercept"
    UPPER_SLOPE = "upper_slope"
    LOWER_SLOPE = "lower_slope"
    UNBIASED = "unbiased"
    EXCLUDED_LOW_R2 = "excluded_low_r2"
    EXCLUDED_INSUFFICIENT_DATA = "excluded_insufficient_data"

    @property
    def is_biased(self) -> bool:
        return self in _BIASED

    @property
    def is_upper(self) -> bool:
        return self in (BiasClass.UPPER_INTERCEPT, BiasClass.UPPER_SLOPE)


_BIASED = frozenset({BiasClass.UPPER_INTERCEPT, BiasClass.LOWER_INTERCEPT,
                     BiasClass.UPPER_SLOPE, BiasClass.LOWER_SLOPE})
_CLASS_ORDER = {c: i for i, c in enumerate(BiasClass)}
_ACTION_ORDER = {a: i for i, a in enumerate(Action)}


@dataclass(frozen=True)
class DetectorConfig:
    r2_threshold: float = 0.5
    sigma_multiplier: float = 2.0
    min_articles_per_keyword: int = 3
    std_mode: str = "population"
    zero_policy: str = "drop"
    log_base: float = math.e

    def __post_init__(self):
        problems = {}
        if not 0 <= self.r2_threshold <= 1:
            problems["r2_threshold"] = "must lie in [0, 1]"
        if not self.sigma_multiplier > 0:
            problems["sigma_multiplier"] = "must be > 0"
        if self.min_articles_per_keyword < 2:
            problems["min_articles_per_keyword"] = "must be >= 2"
        if self.std_mode not in STD_MODES:
            problems["std_mode"] = f"must be one of {STD_MODES}"
        if self.zero_policy not in ZERO_POLICIES:
            problems["zero_policy"] = f"must be one of {ZERO_POLICIES}"
        if not self.log_base > 1:
            problems["log_base"] = "must be > 1"
        if problems:
            raise ConfigInvalid(problems)


@dataclass(frozen=True)
class PairAnalysis:
    keyword: str
    pair: AttributePair
    action: Action
    category: str
    regression: RegressionResult
    pearson_r: float
    n_articles: int

    @property
    def slope(self) -> float:
        return self.regression.slope

    @property
    def intercept(self) -> float:
        return self.regression.intercept

    @property
    def r_squared(self) -> float:
        return self.regression.r_squared


@dataclass(frozen=True)
class Band:
    """Closed interval ``mean +/- multiplier * std`` over one parameter."""

    stats: SummaryStats
    multiplier: float

    @property
    def lower(self) -> float:
        return self.stats.mean - self.multiplier * self.stats.std

    @property
    def upper(self) -> float:
        return self.stats.mean + self.multiplier * self.stats.std

    @property
    def degenerate_spread(self) -> bool:
        return self.stats.std == 0

    def side(self, value: float) -> int:
        """+1 above the band, -1 below, 0 inside (edges count as inside)."""
        if value > self.upper:
            return 1
        if value < self.lower:
            return -1
        return 0


@dataclass(frozen=True)
class ClassificationThresholds:
    intercept: Band
    slope: Band | None
    multiplier: float


class BandSplit(NamedTuple):
    upper: list
    lower: list
    mid: list
    band: Band | None


@dataclass(frozen=True)
class ClassifiedKeyword:
    keyword: str
    pair: AttributePair
    action: Action
    category: str
    bias_class: BiasClass
    biased_toward: AttributeValue | None = None
    analysis: PairAnalysis | None = None


def _band(values: Sequence[float], config: DetectorConfig) -> Band:
    try:
        stats = mean_and_std(values, config.std_mode)
    except InsufficientData:
        # one value under sample std: no spread to speak of
        stats = SummaryStats(float(values[0]), 0.0, len(values), config.std_mode)
    return Band(stats, config.sigma_multiplier)


def category_series(
    counts: CountsMatrix,
    values: Iterable[AttributeValue],
    actions: Iterable[Action],
    config: DetectorConfig,
) -> dict[tuple[AttributeValue, Action], NormalizedSeries | None]:
    """Normalized series over the whole category for each (value, action).

    ``None`` marks a series with no usable (nonzero) counts.
    """
    articles = counts.articles
    out = {}
    for action in actions:
        for value in values:
            vec = {aid: counts.get(aid, value, action) for aid in articles}
            try:
                out[(value, action)] = log_minmax_normalize(vec, config.zero_policy, config.log_base)
            except EmptyInput:
                out[(value, action)] = None
    return out


def regress_keyword_pair(
    keyword: str,
    index: KeywordIndex,
    counts: CountsMatrix,
    pair: AttributePair,
    action: Action,
    config: DetectorConfig = DetectorConfig(),
    *,
    category: str = "",
    series: Mapping[tuple[AttributeValue, Action], NormalizedSeries | None] | None = None,
) -> PairAnalysis:
    """Fit y = first-attribute series on x = second-attribute series over the keyword's articles.

    Normalization spans the whole category held in ``counts``; pass a
    precomputed ``series`` mapping to avoid redoing it per keyword.
    """
    ids = index.articles_for(keyword)
    if series is None:
        series = category_series(counts, (pair.first, pair.second), (action,), config)
    ys = series.get((pair.first, action))
    xs = series.get((pair.second, action))
    if ys is None or xs is None:
        raise InsufficientData(f"{keyword!r}: no nonzero {action.value} counts for {pair.label}")
    common = sorted(a for a in ids if a in ys.values and a in xs.values)
    if len(common) < config.min_articles_per_keyword:
        raise InsufficientData(
            f"{keyword!r}: {len(common)} usable article(s) for {pair.label}/{action.value}, "
            f"need {config.min_articles_per_keyword}"
        )
    x = [xs.values[a] for a in common]
    y = [ys.values[a] for a in common]
    try:
        reg = ols_fit(x, y)
    except ZeroVarianceX:
        raise InsufficientData(f"{keyword!r}: x series is constant over its articles") from None
    try:
        r = pearson(x, y)
    except ZeroVariance:
        r = 0.0
    return PairAnalysis(keyword, pair, action, category, reg, r, len(common))


def filter_by_r2(
    analyses: Iterable[PairAnalysis], config: DetectorConfig = DetectorConfig()
) -> tuple[list[PairAnalysis], list[PairAnalysis]]:
    kept, excluded = [], []
    for a in analyses:
        (kept if a.r_squared > config.r2_threshold else excluded).append(a)
    return kept, excluded


def _split(items: Sequence[PairAnalysis], param: str, config: DetectorConfig) -> BandSplit:
    if not items:
        return BandSplit([], [], [], None)
    band = _band([getattr(a, param) for a in items], config)
    upper, lower, mid = [], [], []
    for a in items:
        side = band.side(getattr(a, param))
        (upper if side > 0 else lower if side < 0 else mid).append(a)
    return BandSplit(upper, lower, mid, band)


def classify_by_intercept(kept: Sequence[PairAnalysis], config: DetectorConfig = DetectorConfig()) -> BandSplit:
    """Split kept fits into (upper, lower, mid, band) on their intercepts."""
    if not kept:
        raise ValueError("classify_by_intercept needs at least one kept fit")
    return _split(kept, "intercept", config)


def classify_by_slope(mid: Sequence[PairAnalysis], config: DetectorConfig = DetectorConfig()) -> BandSplit:
    """Split mid-intercept fits into (upper, lower, unbiased, band) on their slopes."""
    return _split(mid, "slope", config)


def _classified(a: PairAnalysis, cls: BiasClass) -> ClassifiedKeyword:
    toward = None
    if cls.is_biased:
        toward = a.pair.first if cls.is_upper else a.pair.second
    return ClassifiedKeyword(a.keyword, a.pair, a.action, a.category, cls, toward, a)


def classify_cell(
    kept: Sequence[PairAnalysis], config: DetectorConfig = DetectorConfig()
) -> tuple[list[ClassifiedKeyword], ClassificationThresholds | None]:
    """Intercept banding, then slope banding inside the middle band."""
    if not kept:
        return [], None
    icpt = classify_by_intercept(kept, config)
    slope = classify_by_slope(icpt.mid, config)
    out = [_classified(a, BiasClass.UPPER_INTERCEPT) for a in icpt.upper]
    out += [_classified(a, BiasClass.LOWER_INTERCEPT) for a in icpt.lower]
    out += [_classified(a, BiasClass.UPPER_SLOPE) for a in slope.upper]
    out += [_classified(a, BiasClass.LOWER_SLOPE) for a in slope.lower]
    out += [_classified(a, BiasClass.UNBIASED) for a in slope.mid]
    return out, ClassificationThresholds(icpt.band, slope.band, config.sigma_multiplier)


@dataclass(frozen=True)
class CellResult:
    category: str
    pair: AttributePair
    action: Action
    analyses: tuple[PairAnalysis, ...]
    kept: tuple[PairAnalysis, ...]
    insufficient: tuple[str, ...]
    thresholds: ClassificationThresholds | None
    classified: tuple[ClassifiedKeyword, ...]

    @property
    def n_kept(self) -> int:
        return len(self.kept)

    @property
    def biased(self) -> list[ClassifiedKeyword]:
        return [c for c in self.classified if c.bias_class.is_biased]


@dataclass(frozen=True)
class DetectionReport:
    category: str
    pairs: tuple[AttributePair, ...]
    cells: tuple[CellResult, ...] = field(default=())

    def cell(self, pair: AttributePair, action: Action) -> CellResult:
        for c in self.cells:
            if c.pair == pair and c.action is action:
                return c
        raise KeyError((pair, action))

    @property
    def classified(self) -> list[ClassifiedKeyword]:
        return sort_classified([k for c in self.cells for k in c.classified], self.pairs)


def sort_classified(items: Iterable[ClassifiedKeyword], pairs: Sequence[AttributePair]) -> list[ClassifiedKeyword]:
    order = {p: i for i, p in enumerate(pairs)}
    return sorted(
        items,
        key=lambda c: (c.category, order.get(c.pair, len(order)), _ACTION_ORDER[c.action],
                       _CLASS_ORDER[c.bias_class], c.keyword),
    )


def analyze_cell(
    dataset: Dataset,
    index: KeywordIndex,
    pair: AttributePair,
    action: Action,
    config: DetectorConfig,
    series: Mapping | None = None,
) -> CellResult:
    if series is None:
        series = category_series(dataset.counts, (pair.first, pair.second), (action,), config)
    analyses, insufficient = [], []
    for kw in index.words:
        try:
            analyses.append(regress_keyword_pair(kw, index, dataset.counts, pair, action, config,
                                                 category=dataset.category, series=series))
        except InsufficientData:
            insufficient.append(kw)
    kept, excluded = filter_by_r2(analyses, config)
    classified, thresholds = classify_cell(kept, config)
    classified += [_classified(a, BiasClass.EXCLUDED_LOW_R2) for a in excluded]
    classified += [
        ClassifiedKeyword(kw, pair, action, dataset.category, BiasClass.EXCLUDED_INSUFFICIENT_DATA)
        for kw in insufficient
    ]
    classified = sort_classified(classified, [pair])
    return CellResult(dataset.category, pair, action, tuple(analyses), tuple(kept),
                      tuple(insufficient), thresholds, tuple(classified))


def run_detection(
    dataset: Dataset,
    index: KeywordIndex,
    pairs: Sequence[AttributePair] = CANONICAL_PAIRS,
    config: DetectorConfig = DetectorConfig(),
    actions: Sequence[Action] = tuple(Action),
) -> DetectionReport:
    values = sorted({v for p in pairs for v in (p.first, p.second)}, key=lambda v: v.value)
    series = category_series(dataset.counts, values, actions, config)
    cells = [analyze_cell(dataset, index, pair, action, config, series)
             for pair in pairs for action in actions]
    return DetectionReport(dataset.category, tuple(pairs), tuple(cells))


def detect_bias(
    dataset: Dataset,
    index: KeywordIndex,
    pairs: Sequence[AttributePair] = CANONICAL_PAIRS,
    config: DetectorConfig = DetectorConfig(),
) -> list[ClassifiedKeyword]:
    """Classify every (keyword, pair, action); sorted by pair, action, class, keyword."""
    return run_detection(dataset, index, pairs, config).classified
