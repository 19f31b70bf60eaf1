"""Numerical kernels: log-min-max normalization, correlation, OLS, mean/std.

Sums go through :func:`math.fsum` and deviations are taken from the mean
(two-pass), which keeps the kernels within a few ulps of exact arithmetic
for the vector sizes this package handles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

from .errors import EmptyInput, InsufficientData, LengthMismatch, ZeroVariance, ZeroVarianceX

ZERO_POLICIES = ("drop", "add_one")
STD_MODES = ("population", "sample")


@dataclass(frozen=True)
class NormalizationParams:
    min_log: float
    max_log: float
    log_base: float = math.e

    def __post_init__(self):
        if self.max_log < self.min_log:
            raise ValueError("max_log < min_log")
        if not self.log_base > 1:
            raise ValueError("log_base must be > 1")


@dataclass(frozen=True)
class NormalizedSeries:
    values: Mapping[str, float]
    params: NormalizationParams
    degenerate: bool = False
    dropped: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.values)


def log_minmax_normalize(
    counts: Mapping[str, float],
    zero_policy: str = "drop",
    log_base: float = math.e,
) -> NormalizedSeries:
    """Map counts to ``(log c - min log c) / (max log c - min log c)``.

    ``zero_policy="drop"`` removes zero counts, ``"add_one"`` uses ``log(c + 1)``
    for every count. When all logs coincide every value is 0.5 and the
    result is flagged ``degenerate``. The base cancels out, so values are
    computed from natural logs and ``log_base`` only affects ``params``.
    """
    if zero_policy not in ZERO_POLICIES:
        raise ValueError(f"zero_policy must be one of {ZERO_POLICIES}")
    if not log_base > 1:
        raise ValueError("log_base must be > 1")
    shift = 1 if zero_policy == "add_one" else 0
    scale = math.log(log_base)
    logs: dict[str, float] = {}
    dropped = []
    for key, c in counts.items():
        if c < 0:
            raise ValueError(f"negative count for {key!r}")
        if c + shift == 0:
            dropped.append(key)
            continue
        logs[key] = math.log(c + shift)
    if not logs:
        raise EmptyInput("no positive counts left to normalize")
    lo = min(logs.values())
    hi = max(logs.values())
    params = NormalizationParams(lo / scale, hi / scale, log_base)
    if hi == lo:
        values = {k: 0.5 for k in logs}
        return NormalizedSeries(MappingProxyType(values), params, True, tuple(dropped))
    span = hi - lo
    values = {k: (v - lo) / span for k, v in logs.items()}
    return NormalizedSeries(MappingProxyType(values), params, False, tuple(dropped))


def _check_pair(x: Sequence[float], y: Sequence[float], min_len: int = 2) -> None:
    if len(x) != len(y):
        raise LengthMismatch(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < min_len:
        raise InsufficientData(f"need at least {min_len} points, got {len(x)}")


def _centered(v: Sequence[float]) -> tuple[float, float, list[float]]:
    """Mean, a power-of-two scale near the largest |deviation|, and deviations over that scale.

    Scaling before squaring keeps tiny or huge spreads from under/overflowing;
    a power of two keeps the division exact.
    """
    mean = math.fsum(v) / len(v)
    dev = [a - mean for a in v]
    peak = max(abs(d) for d in dev)
    if peak == 0:
        return mean, 0.0, dev
    scale = math.ldexp(1.0, math.frexp(peak)[1])
    return mean, scale, [d / scale for d in dev]


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    _check_pair(x, y)
    _, sx, dx = _centered(x)
    _, sy, dy = _centered(y)
    if sx == 0:
        raise ZeroVariance("x")
    if sy == 0:
        raise ZeroVariance("y")
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(v: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(v)), key=v.__getitem__)
    ranks = [0.0] * len(v)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n: int
    constant_response: bool = False


def ols_fit(x: Sequence[float], y: Sequence[float]) -> RegressionResult:
    """Least-squares line ``y = slope * x + intercept``."""
    _check_pair(x, y)
    mx, sx, dx = _centered(x)
    my, sy, dy = _centered(y)
    if sx == 0:
        raise ZeroVarianceX()
    if sy == 0:
        return RegressionResult(0.0, my, 0.0, len(x), constant_response=True)
    sxx = math.fsum(a * a for a in dx)
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    ss_tot = math.fsum(b * b for b in dy)
    slope = (sy / sx) * (sxy / sxx)
    intercept = my - slope * mx
    # equals 1 - SS_res/SS_tot for a fit with intercept, without the cancellation near 0
    r2 = (sxy / sxx) * (sxy / ss_tot)
    return RegressionResult(slope, intercept, max(0.0, min(1.0, r2)), len(x))


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    n: int
    std_mode: str = "population"


def mean_and_std(values: Sequence[float], std_mode: str = "population") -> SummaryStats:
    if std_mode not in STD_MODES:
        raise ValueError(f"std_mode must be one of {STD_MODES}")
    n = len(values)
    need = 1 if std_mode == "population" else 2
    if n < need:
        raise InsufficientData(f"{std_mode} standard deviation needs at least {need} value(s)")
    if all(v == values[0] for v in values):
        return SummaryStats(float(values[0]), 0.0, n, std_mode)
    mean, scale, dev = _centered(values)
    ss = math.fsum(d * d for d in dev)
    divisor = n if std_mode == "population" else n - 1
    return SummaryStats(mean, scale * math.sqrt(ss / divisor), n, std_mode)
