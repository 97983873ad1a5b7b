"""Cross-query aggregation and correlation with significance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as _st


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class MetricSeries:
    """Per-topic values of one metric.

    ``values`` holds ``(topic_id, cutoff, value)`` triples. Degenerate topics are
    kept out of ``values`` and counted per cutoff in ``excluded``.
    """

    metric: str
    values: list = field(default_factory=list)
    excluded: dict = field(default_factory=dict)

    def add(self, topic_id, cutoff: int, value: float, degenerate: bool = False) -> None:
        if degenerate:
            self.excluded[cutoff] = self.excluded.get(cutoff, 0) + 1
            return
        if math.isnan(value):
            raise ValueError(f"NaN value for {self.metric} on topic {topic_id!r} at k={cutoff}")
        if any(t == topic_id and c == cutoff for t, c, _ in self.values):
            raise ValueError(f"duplicate value for topic {topic_id!r} at k={cutoff}")
        self.values.append((topic_id, cutoff, float(value)))

    def at(self, cutoff: int) -> dict:
        """``topic_id -> value`` at one cutoff."""
        return {t: v for t, c, v in self.values if c == cutoff}

    def cutoffs(self) -> list:
        return sorted({c for _, c, _ in self.values} | set(self.excluded))


AGGREGATES = ("mean", "min", "max")


def aggregate(series: MetricSeries, how: str = "mean", cutoff=None) -> float:
    """Mean, min or max over topics at one cutoff (the only cutoff if omitted)."""
    if how not in AGGREGATES:
        raise ValueError(f"unknown aggregate {how!r}")
    if cutoff is None:
        cutoffs = {c for _, c, _ in series.values}
        if len(cutoffs) > 1:
            raise ValueError(f"series {series.metric!r} spans several cutoffs; pass one")
        values = [v for _, _, v in series.values]
    else:
        values = [v for _, c, v in series.values if c == cutoff]
    if not values:
        raise ValueError(f"no non-degenerate values for {series.metric!r} at k={cutoff}")
    if how == "mean":
        return math.fsum(values) / len(values)
    return min(values) if how == "min" else max(values)


@dataclass(frozen=True)
class Correlation:
    coefficient: float
    p_value: float
    n: int
    approximate: bool = False

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _paired(x, y):
    if isinstance(x, dict) and isinstance(y, dict):
        keys = sorted(set(x) & set(y), key=str)
        x, y = [x[k] for k in keys], [y[k] for k in keys]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("correlation needs two equally long 1-d series")
    if len(x) < 3:
        raise ValueError(f"correlation needs at least 3 pairs, got {len(x)}")
    return x, y


def _r(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 0 or syy <= 0:
        raise UndefinedCorrelationError("undefined correlation: a series has zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def _t_pvalue(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * _st.t.sf(abs(t), n - 2)))


def pearson(x, y) -> Correlation:
    """Sample Pearson r with a two-sided t-test p-value (n - 2 dof).

    ``x`` and ``y`` are sequences of equal length, or dicts paired on their
    shared keys (e.g. topic ids).
    """
    x, y = _paired(x, y)
    r = _r(x, y)
    return Correlation(r, _t_pvalue(r, len(x)), len(x))


def spearman(x, y) -> Correlation:
    """Pearson r of mid-ranks; the p-value is flagged approximate below n = 10."""
    x, y = _paired(x, y)
    rho = _r(_st.rankdata(x), _st.rankdata(y))
    return Correlation(rho, _t_pvalue(rho, len(x)), len(x), approximate=len(x) < 10)


def correlate(x: Sequence, y: Sequence, method: str = "pearson") -> Correlation:
    if method == "pearson":
        return pearson(x, y)
    if method == "spearman":
        return spearman(x, y)
    raise ValueError(f"unknown correlation method {method!r}")
