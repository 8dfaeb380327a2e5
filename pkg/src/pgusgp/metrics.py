"""Statistical helpers for run analysis."""

from __future__ import annotations

import math
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ParameterError, UndefinedCorrelationError

EXACT_WILCOXON_MAX = 10  # exact rank-sum distribution up to this size per side


def pearson_fitness_correlation(predicted: Sequence[float], true: Sequence[float]) -> float:
    """Product-moment correlation between predicted and true fitness values."""
    x = np.asarray(predicted, dtype=float)
    y = np.asarray(true, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("inputs must be equal-length 1-D sequences")
    if len(x) < 2:
        raise ParameterError("need at least 2 points for a correlation")
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for zero-variance input")
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


class WilcoxonResult(NamedTuple):
    statistic: float  # rank sum of the first sample (midranks)
    pvalue: float
    tied: bool


def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled), dtype=float)
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_pvalue(ranks: np.ndarray, n: int, w_observed: float) -> float:
    """Two-sided exact p via the distribution of n-subset rank sums.

    Midranks are doubled to integers and the count of subsets per (size, sum)
    is built by dynamic programming, which keeps this independent of any
    enumeration-based check.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(sorted(doubled, reverse=True)[:n])
    counts = [[0] * (total + 1) for _ in range(n + 1)]
    counts[0][0] = 1
    for value in doubled:
        for k in range(min(n, len(doubled)) - 1, -1, -1):
            row = counts[k]
            nxt = counts[k + 1]
            for s in range(total - value + 1):
                c = row[s]
                if c:
                    nxt[s + value] += c
    w2 = int(round(2 * w_observed))
    all_subsets = sum(counts[n])
    lower = sum(c for s, c in enumerate(counts[n]) if s <= w2)
    upper = sum(c for s, c in enumerate(counts[n]) if s >= w2)
    return min(1.0, 2.0 * min(lower, upper) / all_subsets)


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided rank-sum test.

    Exact distribution when both samples have at most EXACT_WILCOXON_MAX
    observations; otherwise a normal approximation with tie correction and no
    continuity correction. Fully tied data yields p = 1 with the tie flag set.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) < 3 or len(y) < 3:
        raise ParameterError("each sample needs at least 3 observations")
    n, m = len(x), len(y)
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    tied = len(np.unique(pooled)) < n + m
    w = float(ranks[:n].sum())

    if max(n, m) <= EXACT_WILCOXON_MAX:
        return WilcoxonResult(statistic=w, pvalue=_exact_pvalue(ranks, n, w), tied=tied)

    total = n + m
    mean = n * (total + 1) / 2.0
    tie_term = 0.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    variance = n * m / 12.0 * ((total + 1) - tie_term / (total * (total - 1)))
    if variance <= 0.0:
        return WilcoxonResult(statistic=w, pvalue=1.0, tied=True)
    z = (w - mean) / math.sqrt(variance)
    return WilcoxonResult(statistic=w, pvalue=math.erfc(abs(z) / math.sqrt(2.0)), tied=tied)


def average_ranks(
    means_by_algorithm: Mapping[str, Sequence[float]],
    larger_is_better: bool = True,
) -> dict[str, float]:
    """Mean rank of each algorithm across datasets (rank 1 = best, midrank ties)."""
    if not means_by_algorithm:
        raise ParameterError("no algorithms to rank")
    names = list(means_by_algorithm)
    columns = [list(v) for v in means_by_algorithm.values()]
    width = len(columns[0])
    if width == 0 or any(len(c) != width for c in columns):
        raise ParameterError("every algorithm needs the same nonzero number of datasets")
    totals = {name: 0.0 for name in names}
    for d in range(width):
        values = np.asarray([columns[i][d] for i in range(len(names))], dtype=float)
        keyed = -values if larger_is_better else values
        ranks = _midranks(keyed)
        for i, name in enumerate(names):
            totals[name] += ranks[i]
    return {name: totals[name] / width for name in names}
