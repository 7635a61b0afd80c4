"""Fairness metrics over per-group error rates at fixed thresholds.

Three aggregate scores are computed from the group FMR and FNMR vectors at
each threshold, each weighting its FMR and FNMR components by a single
parameter alpha in (0, 1), default 0.5:

* FDR (fairness discrepancy rate): 1 - (alpha * A + (1 - alpha) * B) where
  A and B are the maximum pairwise FMR and FNMR differences. 1 = fair.
* IR (inequity rate): A^alpha * B^(1-alpha) where A and B are the max/min
  FMR and FNMR ratios. 1 = fair, unbounded above. Extended-real rules make
  the published "inf" entries reproducible: x/0 = +inf for x > 0, 0/0 = 1,
  and any infinite factor makes IR infinite.
* GARBE: alpha * Gini(FMRs) + (1 - alpha) * Gini(FNMRs) with the
  sample-corrected Gini coefficient. 0 = fair.

All rates enter as fractions, never percentages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, UndefinedMetricError
from .score_model import GroupRateTable

DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class FairnessConfig:
    """Weight on the FMR component of every metric; 0 < alpha < 1."""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0) or not math.isfinite(self.alpha):
            raise InputError(f"alpha {self.alpha} outside (0, 1)")


@dataclass(frozen=True)
class MetricRow:
    """Metrics at one threshold, with the intermediate quantities."""

    label: str
    fdr: float
    ir: float
    garbe: float
    a_diff: float
    b_diff: float
    a_ratio: float
    b_ratio: float
    gini_fmr: float
    gini_fnmr: float


@dataclass(frozen=True)
class FairnessReport:
    rows: tuple[MetricRow, ...]
    alpha: float
    groups: tuple[str, ...]

    def row(self, label: str) -> MetricRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise InputError(f"no metric row for threshold {label!r}")


def _rate_vector(
    rates: Sequence[float] | np.ndarray,
    name: str,
    upper: float | None = 1.0,
) -> np.ndarray:
    arr = np.asarray(rates, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"{name} must be a flat vector of rates")
    if arr.size < 2:
        raise UndefinedMetricError(
            f"{name} needs rates for at least 2 groups, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains a non-finite rate")
    if arr.min() < 0.0 or (upper is not None and arr.max() > upper):
        raise InputError(f"{name} contains a rate outside bounds")
    return arr


def _check_alpha(alpha: float) -> float:
    if not (0.0 < alpha < 1.0):
        raise InputError(f"alpha {alpha} outside (0, 1)")
    return float(alpha)


def _max_gap(rates: np.ndarray) -> float:
    """Maximum pairwise absolute difference: max - min."""
    return float(rates.max() - rates.min())


def _extreme_ratio(rates: np.ndarray) -> float:
    """max/min under extended-real rules: x/0 = +inf for x > 0, 0/0 = 1."""
    mx = float(rates.max())
    mn = float(rates.min())
    if mn > 0.0:
        return mx / mn
    return 1.0 if mx == 0.0 else math.inf


def fdr(
    fmr_row: Sequence[float] | np.ndarray,
    fnmr_row: Sequence[float] | np.ndarray,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Fairness discrepancy rate in [0, 1]; 1 = fair."""
    alpha = _check_alpha(alpha)
    a = _max_gap(_rate_vector(fmr_row, "fmr_row"))
    b = _max_gap(_rate_vector(fnmr_row, "fnmr_row"))
    return 1.0 - (alpha * a + (1.0 - alpha) * b)


def ir(
    fmr_row: Sequence[float] | np.ndarray,
    fnmr_row: Sequence[float] | np.ndarray,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Inequity rate; 1 = fair, +inf when an extreme ratio is infinite."""
    alpha = _check_alpha(alpha)
    a = _extreme_ratio(_rate_vector(fmr_row, "fmr_row"))
    b = _extreme_ratio(_rate_vector(fnmr_row, "fnmr_row"))
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return a**alpha * b ** (1.0 - alpha)


def gini(rates: Sequence[float] | np.ndarray) -> float:
    """Sample-corrected Gini coefficient of a non-negative rate vector.

    (n/(n-1)) * sum_{i,j} |r_i - r_j| / (2 n^2 rbar), the double sum over
    all ordered pairs. An all-zero vector is perfectly equal and returns 0.
    """
    r = _rate_vector(rates, "rates", upper=None)
    n = r.size
    rbar = float(r.mean())
    if rbar == 0.0:
        return 0.0
    total = float(np.abs(r[:, None] - r[None, :]).sum())
    g = (n / (n - 1)) * (total / (2.0 * n * n * rbar))
    # the double sum can overshoot the algebraic maximum of 1 by an ulp
    return min(g, 1.0)


def garbe(
    fmr_row: Sequence[float] | np.ndarray,
    fnmr_row: Sequence[float] | np.ndarray,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Gini-based equitability score in [0, 1]; 0 = fair."""
    alpha = _check_alpha(alpha)
    return alpha * gini(fmr_row) + (1.0 - alpha) * gini(fnmr_row)


def metric_suite(
    table: GroupRateTable,
    cfg: FairnessConfig = FairnessConfig(),
) -> FairnessReport:
    """All three metrics at every threshold of a rate table.

    Requires at least two groups; raises UndefinedMetricError otherwise.
    """
    if len(table.groups) < 2:
        raise UndefinedMetricError(
            f"fairness metrics need >= 2 groups, table has {len(table.groups)}"
        )
    alpha = cfg.alpha
    rows = []
    for z, label in enumerate(table.threshold_labels):
        fmr_col = table.fmr[:, z]
        fnmr_col = table.fnmr[:, z]
        a_diff = _max_gap(fmr_col)
        b_diff = _max_gap(fnmr_col)
        a_ratio = _extreme_ratio(fmr_col)
        b_ratio = _extreme_ratio(fnmr_col)
        g_fmr = gini(fmr_col)
        g_fnmr = gini(fnmr_col)
        if math.isinf(a_ratio) or math.isinf(b_ratio):
            ir_value = math.inf
        else:
            ir_value = a_ratio**alpha * b_ratio ** (1.0 - alpha)
        rows.append(
            MetricRow(
                label=label,
                fdr=1.0 - (alpha * a_diff + (1.0 - alpha) * b_diff),
                ir=ir_value,
                garbe=alpha * g_fmr + (1.0 - alpha) * g_fnmr,
                a_diff=a_diff,
                b_diff=b_diff,
                a_ratio=a_ratio,
                b_ratio=b_ratio,
                gini_fmr=g_fmr,
                gini_fnmr=g_fnmr,
            )
        )
    return FairnessReport(rows=tuple(rows), alpha=alpha, groups=table.groups)
