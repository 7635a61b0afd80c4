"""Threshold solving at global FMR operational points and per-group rates.

The decision rule is similarity-style: a comparison is a match iff its
score >= t. For a target global FMR the solver returns the smallest
candidate threshold whose realized FMR on the pooled non-mated scores does
not exceed the target. Candidates are the distinct non-mated scores plus a
sentinel one ulp above the largest non-mated score (which realizes FMR 0),
so results are exact empirical rates with no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, UnsolvableError
from .score_model import ComparisonSet, GroupRateTable

DEFAULT_FMR_TARGETS = (0.1, 0.01, 0.001)


@dataclass(frozen=True)
class OperationalPoints:
    """Ordered global FMR targets, strictly decreasing, each in (0, 1]."""

    targets: tuple[float, ...] = DEFAULT_FMR_TARGETS

    def __post_init__(self) -> None:
        targets = tuple(float(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        for t in targets:
            if not (0.0 < t <= 1.0) or not math.isfinite(t):
                raise InputError(f"FMR target {t} outside (0, 1]")
        if any(a <= b for a, b in zip(targets, targets[1:])):
            raise InputError("FMR targets must be strictly decreasing")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"t{i}" for i in range(1, len(self.targets) + 1))


@dataclass(frozen=True)
class SolvedThreshold:
    label: str
    target: float
    value: float
    achieved_fmr: float


@dataclass(frozen=True)
class ThresholdSet:
    """Solved decision thresholds, one per operational point."""

    thresholds: tuple[SolvedThreshold, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.thresholds)

    @property
    def values(self) -> np.ndarray:
        return np.array([t.value for t in self.thresholds], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.thresholds)

    def __iter__(self):
        return iter(self.thresholds)


def _nonmated_scores(source: ComparisonSet | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(source, ComparisonSet):
        return source.nonmated_scores
    return np.asarray(source, dtype=np.float64)


def solve_threshold(
    source: ComparisonSet | Sequence[float] | np.ndarray,
    target: float,
) -> tuple[float, float]:
    """Solve one decision threshold for a global FMR target.

    ``source`` is a ComparisonSet (its pooled non-mated scores are used) or
    a raw sequence of non-mated scores. Returns ``(threshold, achieved
    FMR)`` where the threshold is the smallest candidate with achieved FMR
    <= target. Permutation of the input never changes the result.
    """
    if not (0.0 < target <= 1.0):
        raise InputError(f"FMR target {target} outside (0, 1]")
    scores = _nonmated_scores(source)
    if scores.size == 0:
        raise UnsolvableError("no non-mated scores to solve a threshold on")
    if not np.all(np.isfinite(scores)):
        raise InputError("non-mated scores must be finite")

    ordered = np.sort(scores)
    n = ordered.size
    candidates = np.unique(ordered)
    # count of scores >= each candidate, then the sentinel with count 0
    counts = n - np.searchsorted(ordered, candidates, side="left")
    achieved = counts / n
    hits = np.nonzero(achieved <= target)[0]
    if hits.size:
        k = int(hits[0])
        return float(candidates[k]), float(achieved[k])
    sentinel = math.nextafter(float(candidates[-1]), math.inf)
    return sentinel, 0.0


def solve_all(
    source: ComparisonSet | Sequence[float] | np.ndarray,
    points: OperationalPoints = OperationalPoints(),
) -> ThresholdSet:
    """Solve every operational point; thresholds are non-decreasing as
    targets decrease (checked)."""
    solved = []
    for label, target in zip(points.labels, points.targets):
        value, achieved = solve_threshold(source, target)
        solved.append(SolvedThreshold(label=label, target=target, value=value, achieved_fmr=achieved))
    for a, b in zip(solved, solved[1:]):
        if b.value < a.value:
            raise AssertionError("solver produced decreasing thresholds")
    return ThresholdSet(thresholds=tuple(solved))


def _rates_against(scores: np.ndarray, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(fraction >= t, fraction < t) for each threshold, via one sort."""
    ordered = np.sort(scores)
    n = ordered.size
    below = np.searchsorted(ordered, thresholds, side="left")
    return (n - below) / n, below / n


def group_rates(cs: ComparisonSet, ts: ThresholdSet) -> GroupRateTable:
    """Per-group FMR/FNMR at each solved threshold, plus pooled overall rows.

    fmr[g, z] is the fraction of group-g non-mated scores >= t_z; fnmr[g, z]
    the fraction of group-g mated scores < t_z. Every group needs at least
    one mated and one non-mated record.
    """
    missing = [
        g for g in cs.groups
        if cs.mated_count(g) == 0 or cs.nonmated_count(g) == 0
    ]
    if missing:
        raise InputError(
            "cannot compute per-group rates; groups missing mated or "
            f"non-mated records: {missing}"
        )

    values = ts.values
    n_groups = len(cs.groups)
    fmr = np.empty((n_groups, len(ts)), dtype=np.float64)
    fnmr = np.empty((n_groups, len(ts)), dtype=np.float64)
    for k, group in enumerate(cs.groups):
        fmr[k], _ = _rates_against(cs.group_scores(group, mated=False), values)
        _, fnmr[k] = _rates_against(cs.group_scores(group, mated=True), values)
    overall_fmr, _ = _rates_against(cs.nonmated_scores, values)
    _, overall_fnmr = _rates_against(cs.mated_scores, values)

    return GroupRateTable(
        groups=cs.groups,
        threshold_labels=ts.labels,
        fmr=fmr,
        fnmr=fnmr,
        overall_fmr=overall_fmr,
        overall_fnmr=overall_fnmr,
        thresholds=ts,
    )
