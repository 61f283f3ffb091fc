"""Rank statistics used to compare training setups across repeated runs.

The omnibus test is Kruskal-Wallis with tie correction.  For tiny samples the
chi-square approximation is poor, so the p-value switches to exact enumeration
of the permutation distribution whenever that is cheap; effect sizes use
Cliff's delta with the conventional magnitude thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.stats import chi2, rankdata

from .metrics import aggregate

# Largest number of distinct group assignments we enumerate exactly.
EXACT_LIMIT = 50_000

CLIFF_THRESHOLDS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


@dataclass(frozen=True)
class StatResult:
    h: float
    p: float
    alpha: float
    delta: float
    magnitude: str
    significant: bool
    mark: str


def _h_statistic(ranks: np.ndarray, sizes: Sequence[int], tie_term: float) -> float:
    n = len(ranks)
    offset = 0
    rank_sq = 0.0
    for size in sizes:
        r = ranks[offset : offset + size].sum()
        rank_sq += r * r / size
        offset += size
    h = 12.0 / (n * (n + 1)) * rank_sq - 3.0 * (n + 1)
    correction = 1.0 - tie_term / (n**3 - n)
    if correction <= 0:
        return 0.0
    return float(h / correction)


def _tie_term(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def _arrangement_count(sizes: Sequence[int]) -> int:
    total = math.factorial(sum(sizes))
    for size in sizes:
        total //= math.factorial(size)
    return total


def _exact_p(ranks: np.ndarray, sizes: Sequence[int], tie_term: float, observed: float) -> float:
    """Probability of an H at least as large, over all group assignments."""
    n = len(ranks)
    hits = 0
    total = 0

    def recurse(available: tuple[int, ...], group: int, chosen_ranks: list[float]) -> None:
        nonlocal hits, total
        if group == len(sizes) - 1:
            ranks_per_group = chosen_ranks + [sum(ranks[i] for i in available)]
            rank_sq = sum(
                r * r / size for r, size in zip(ranks_per_group, sizes)
            )
            h = 12.0 / (n * (n + 1)) * rank_sq - 3.0 * (n + 1)
            correction = 1.0 - tie_term / (n**3 - n)
            h = h / correction if correction > 0 else 0.0
            total += 1
            if h >= observed - 1e-9:
                hits += 1
            return
        for picked in combinations(available, sizes[group]):
            remaining = tuple(i for i in available if i not in picked)
            recurse(remaining, group + 1, chosen_ranks + [sum(ranks[i] for i in picked)])

    recurse(tuple(range(n)), 0, [])
    return hits / total


def kruskal_wallis(samples: Sequence[Sequence[float]], method: str = "auto") -> tuple[float, float]:
    """Kruskal-Wallis H and p-value across two or more groups.

    ``method`` is ``"chi2"``, ``"exact"`` or ``"auto"`` (exact when the
    permutation space is small enough to enumerate, chi-square otherwise).
    Identical values in every group give ``(0.0, 1.0)``.
    """
    groups = [np.asarray(s, dtype=float) for s in samples]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("groups must be nonempty")
    if method not in ("auto", "chi2", "exact"):
        raise ValueError(f"unknown method: {method!r}")

    pooled = np.concatenate(groups)
    if np.unique(pooled).size == 1:
        return 0.0, 1.0

    sizes = [len(g) for g in groups]
    ranks = rankdata(pooled)
    tie_term = _tie_term(pooled)
    h = _h_statistic(ranks, sizes, tie_term)

    if method == "auto":
        method = "exact" if _arrangement_count(sizes) <= EXACT_LIMIT else "chi2"
    if method == "exact":
        p = _exact_p(ranks, sizes, tie_term, h)
    else:
        p = float(chi2.sf(h, df=len(groups) - 1))
    return h, p


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> tuple[float, str]:
    """Dominance of ``a`` over ``b`` in [-1, 1] plus its magnitude label."""
    xs = np.asarray(a, dtype=float)
    ys = np.asarray(b, dtype=float)
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("both samples must be nonempty")
    diff = xs[:, None] - ys[None, :]
    delta = float((np.sum(diff > 0) - np.sum(diff < 0)) / diff.size)
    return delta, delta_magnitude(delta)


def delta_magnitude(delta: float) -> str:
    for threshold, label in CLIFF_THRESHOLDS:
        if abs(delta) < threshold:
            return label
    return "large"


def compare_runs(
    records_a: Sequence,
    records_b: Sequence,
    metric: str = "f1",
    alpha: float = 0.05,
    mode: str = "pooled",
) -> StatResult:
    """Kruskal-Wallis comparison of per-run aggregate scores of two setups.

    The mark follows the reporting convention used in the emitted tables:
    ``"+"`` for a significant difference with large effect, ``"/"`` otherwise.
    """
    if len(records_a) < 2 or len(records_b) < 2:
        raise ValueError("need at least two runs per side")
    if metric not in ("f1", "g_mean"):
        raise ValueError(f"unknown metric: {metric!r}")
    vals_a = [getattr(aggregate(r, mode)[0], metric) for r in records_a]
    vals_b = [getattr(aggregate(r, mode)[0], metric) for r in records_b]
    return compare_samples(vals_a, vals_b, alpha=alpha)


def compare_samples(vals_a: Sequence[float], vals_b: Sequence[float], alpha: float = 0.05) -> StatResult:
    h, p = kruskal_wallis([vals_a, vals_b])
    delta, magnitude = cliffs_delta(vals_a, vals_b)
    significant = p < alpha
    mark = "+" if significant and magnitude == "large" else "/"
    return StatResult(
        h=h, p=p, alpha=alpha, delta=delta, magnitude=magnitude,
        significant=significant, mark=mark,
    )
