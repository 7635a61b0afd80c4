"""Seeded score-distribution scenarios, bias flagging, and the
identify -> mitigate -> re-audit pipeline.

Scores are modeled per (group x mated-status) as normal distributions
truncated to [-1, 1], mimicking cosine-similarity ranges. Sampling is
inverse-CDF: with Phi the standard normal CDF and u uniform on (0, 1),

    x = mean + sd * Phi^-1(Phi(a) + u * (Phi(b) - Phi(a))),
    a = (-1 - mean) / sd,  b = (1 - mean) / sd.

Uniforms come from numpy's PCG64 generator seeded per (scenario seed,
mated-status, group id), so generation per group is order-independent and
reproducible, and the merged output order is canonical (group order, then
mated before non-mated records).

Mitigation emulates demographically targeted fine-tuning as a parametric
shift: the impostor (non-mated) mean of the treated groups moves toward a
cross-group reference by ``strength``. Two extra knobs reproduce the
over-correction failure mode seen when retraining overshoots:
``reference_offset`` displaces the reference (negative values push the
treated impostor mean past the other groups), and ``mated_spread_gain``
widens the treated groups' genuine-score spread, raising their FNMR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InputError
from .fairness_metrics import FairnessConfig, FairnessReport, metric_suite
from .rate_engine import OperationalPoints, ThresholdSet, group_rates, solve_all
from .score_model import ComparisonRecord, ComparisonSet, GroupRateTable, check_group_token

SCORE_MIN = -1.0
SCORE_MAX = 1.0

_MASK64 = (1 << 64) - 1

MITIGATION_MODES = ("targeted", "balanced")


@dataclass(frozen=True)
class GroupDistribution:
    """Score-distribution parameters and sample counts for one group."""

    group: str
    mated_mean: float
    mated_sd: float
    nonmated_mean: float
    nonmated_sd: float
    n_mated: int
    n_nonmated: int

    def __post_init__(self) -> None:
        check_group_token(self.group)
        for name in ("mated_mean", "nonmated_mean"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"{self.group}.{name} must be finite")
        for name in ("mated_sd", "nonmated_sd"):
            sd = getattr(self, name)
            if not (math.isfinite(sd) and sd > 0.0):
                raise InputError(f"{self.group}.{name} must be > 0")
        for name in ("n_mated", "n_nonmated"):
            count = getattr(self, name)
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise InputError(f"{self.group}.{name} must be an integer >= 1")
        for mean, sd, name in (
            (self.mated_mean, self.mated_sd, "mated"),
            (self.nonmated_mean, self.nonmated_sd, "nonmated"),
        ):
            lo, hi = _truncation_mass(mean, sd)
            if not hi > lo:
                raise InputError(
                    f"{self.group}.{name} distribution has no mass in "
                    f"[{SCORE_MIN}, {SCORE_MAX}]"
                )


@dataclass(frozen=True)
class ScenarioSpec:
    """A full synthetic scenario: >= 2 groups plus a 64-bit seed."""

    groups: tuple[GroupDistribution, ...]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if len(self.groups) < 2:
            raise InputError("scenario needs at least 2 groups")
        ids = [g.group for g in self.groups]
        if len(set(ids)) != len(ids):
            raise InputError("scenario group ids must be unique")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InputError("seed must be an integer")
        if not (0 <= self.seed <= _MASK64):
            raise InputError("seed must fit in an unsigned 64-bit integer")

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(g.group for g in self.groups)


@dataclass(frozen=True)
class MitigationSpec:
    """Parametric stand-in for demographically targeted fine-tuning.

    ``targeted`` shifts only the treated groups' non-mated mean toward the
    unweighted mean of the untreated groups'; ``balanced`` shifts every
    group toward the global unweighted mean. ``target_groups`` may be left
    empty in targeted mode, in which case the groups flagged by bias
    identification are treated.
    """

    mode: str
    target_groups: tuple[str, ...] = ()
    strength: float = 1.0
    reference_offset: float = 0.0
    mated_spread_gain: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_groups", tuple(self.target_groups))
        if self.mode not in MITIGATION_MODES:
            raise InputError(f"mode must be one of {MITIGATION_MODES}, got {self.mode!r}")
        if not (0.0 <= self.strength <= 1.0):
            raise InputError(f"strength {self.strength} outside [0, 1]")
        if not math.isfinite(self.reference_offset):
            raise InputError("reference_offset must be finite")
        if not (math.isfinite(self.mated_spread_gain) and self.mated_spread_gain >= 0.0):
            raise InputError("mated_spread_gain must be >= 0")
        for g in self.target_groups:
            check_group_token(g)


@dataclass(frozen=True)
class BiasPolicy:
    """Flagging rule: group FMR > kappa * overall FMR at an in-scope threshold."""

    kappa: float = 2.0
    scope: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 1.0):
            raise InputError(f"kappa must be > 1, got {self.kappa}")
        if self.scope is not None:
            object.__setattr__(self, "scope", tuple(self.scope))


@dataclass(frozen=True)
class MetricDelta:
    """after - before for one threshold; ir is None when either side is inf."""

    label: str
    fdr: float
    ir: float | None
    garbe: float


@dataclass(frozen=True)
class PipelineReport:
    """Before/after audits with per-threshold metric deltas.

    Both stages share the group set and operational points; thresholds are
    re-solved on each stage's own pooled scores. Rate deltas are
    group x threshold matrices (after - before).
    """

    before_rates: GroupRateTable
    before_metrics: FairnessReport
    after_rates: GroupRateTable
    after_metrics: FairnessReport
    identified: tuple[str, ...]
    applied_targets: tuple[str, ...]
    mitigation: MitigationSpec
    deltas: tuple[MetricDelta, ...]
    fmr_delta: np.ndarray
    fnmr_delta: np.ndarray
    seed_before: int
    seed_after: int

    def delta(self, label: str) -> MetricDelta:
        for d in self.deltas:
            if d.label == label:
                return d
        raise InputError(f"no delta row for threshold {label!r}")


def _truncation_mass(mean: float, sd: float) -> tuple[float, float]:
    lo = float(ndtr((SCORE_MIN - mean) / sd))
    hi = float(ndtr((SCORE_MAX - mean) / sd))
    return lo, hi


def _stream(seed: int, role: str, group: str) -> np.random.Generator:
    token = int.from_bytes(f"{role}:{group}".encode(), "big")
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, token]))


def _sample_truncated(
    rng: np.random.Generator, mean: float, sd: float, size: int
) -> np.ndarray:
    lo, hi = _truncation_mass(mean, sd)
    u = rng.random(size)
    x = mean + sd * ndtri(lo + u * (hi - lo))
    # inverse-CDF rounding can land an ulp outside the window
    return np.clip(x, SCORE_MIN, SCORE_MAX)


def generate_scenario(spec: ScenarioSpec) -> ComparisonSet:
    """Draw the scenario's comparison records; identical spec -> identical set."""
    records: list[ComparisonRecord] = []
    for g in spec.groups:
        mated = _sample_truncated(
            _stream(spec.seed, "mated", g.group), g.mated_mean, g.mated_sd, g.n_mated
        )
        nonmated = _sample_truncated(
            _stream(spec.seed, "nonmated", g.group),
            g.nonmated_mean,
            g.nonmated_sd,
            g.n_nonmated,
        )
        records.extend(
            ComparisonRecord(score=float(x), mated=True, group=g.group) for x in mated
        )
        records.extend(
            ComparisonRecord(score=float(x), mated=False, group=g.group) for x in nonmated
        )
    return ComparisonSet(records)


def identify_bias(
    report: FairnessReport,
    rates: GroupRateTable,
    policy: BiasPolicy = BiasPolicy(),
) -> list[str]:
    """Groups whose FMR exceeds kappa x the overall FMR at any in-scope threshold.

    ``report`` and ``rates`` must come from the same audit; the rule reads
    the rate table, the report pins the audit the decision belongs to.
    """
    if rates.overall_fmr is None:
        raise InputError("rate table has no overall FMR row to compare against")
    if report.groups != rates.groups:
        raise InputError("fairness report and rate table disagree on groups")
    labels = rates.threshold_labels if policy.scope is None else policy.scope
    unknown = [t for t in labels if t not in rates.threshold_labels]
    if unknown:
        raise InputError(f"scope names unknown thresholds: {unknown}")
    flagged = []
    for k, group in enumerate(rates.groups):
        for label in labels:
            z = rates.threshold_labels.index(label)
            if rates.fmr[k, z] > policy.kappa * rates.overall_fmr[z]:
                flagged.append(group)
                break
    return flagged


def _effective_targets(
    spec: ScenarioSpec, mit: MitigationSpec, biased: Sequence[str]
) -> tuple[str, ...]:
    if mit.mode == "balanced":
        return spec.group_ids
    targets = mit.target_groups or tuple(biased)
    if not targets:
        raise InputError("targeted mitigation has an empty target set")
    unknown = [g for g in targets if g not in spec.group_ids]
    if unknown:
        raise InputError(f"target groups not in scenario: {unknown}")
    if len(targets) == len(spec.group_ids):
        raise InputError("targeted mitigation needs at least one untreated group")
    return tuple(targets)


def advance_seed(seed: int) -> int:
    """Deterministic seed advance so before/after stages draw fresh samples."""
    return (seed + 1) & _MASK64


def apply_mitigation(
    spec: ScenarioSpec,
    mit: MitigationSpec,
    biased: Sequence[str] = (),
) -> ScenarioSpec:
    """Return the mitigated scenario; only distribution parameters of treated
    groups change, and the seed advances deterministically.

    Treated groups' non-mated mean moves by ``strength`` toward the
    reference (untreated unweighted mean in targeted mode, global unweighted
    mean in balanced mode) plus ``reference_offset``; their mated sd is
    scaled by ``1 + strength * mated_spread_gain``.
    """
    targets = _effective_targets(spec, mit, biased)
    if mit.mode == "balanced":
        reference = float(np.mean([g.nonmated_mean for g in spec.groups]))
    else:
        reference = float(
            np.mean([g.nonmated_mean for g in spec.groups if g.group not in targets])
        )
    reference += mit.reference_offset

    s = mit.strength
    new_groups = []
    for g in spec.groups:
        if g.group in targets:
            g = replace(
                g,
                nonmated_mean=g.nonmated_mean + s * (reference - g.nonmated_mean),
                mated_sd=g.mated_sd * (1.0 + s * mit.mated_spread_gain),
            )
        new_groups.append(g)
    return ScenarioSpec(groups=tuple(new_groups), seed=advance_seed(spec.seed))


def run_pipeline(
    spec: ScenarioSpec,
    mit: MitigationSpec,
    points: OperationalPoints = OperationalPoints(),
    cfg: FairnessConfig = FairnessConfig(),
    policy: BiasPolicy = BiasPolicy(),
) -> PipelineReport:
    """Identify -> mitigate -> re-audit; thresholds re-solved per stage."""
    before = generate_scenario(spec)
    ts_before = solve_all(before, points)
    rates_before = group_rates(before, ts_before)
    metrics_before = metric_suite(rates_before, cfg)

    identified = identify_bias(metrics_before, rates_before, policy)
    applied = _effective_targets(spec, mit, identified)
    mitigated = apply_mitigation(spec, mit, identified)

    after = generate_scenario(mitigated)
    ts_after = solve_all(after, points)
    rates_after = group_rates(after, ts_after)
    metrics_after = metric_suite(rates_after, cfg)

    deltas = []
    for row_b, row_a in zip(metrics_before.rows, metrics_after.rows):
        both_finite = math.isfinite(row_b.ir) and math.isfinite(row_a.ir)
        deltas.append(
            MetricDelta(
                label=row_b.label,
                fdr=row_a.fdr - row_b.fdr,
                ir=(row_a.ir - row_b.ir) if both_finite else None,
                garbe=row_a.garbe - row_b.garbe,
            )
        )

    return PipelineReport(
        before_rates=rates_before,
        before_metrics=metrics_before,
        after_rates=rates_after,
        after_metrics=metrics_after,
        identified=tuple(identified),
        applied_targets=applied,
        mitigation=mit,
        deltas=tuple(deltas),
        fmr_delta=rates_after.fmr - rates_before.fmr,
        fnmr_delta=rates_after.fnmr - rates_before.fnmr,
        seed_before=spec.seed,
        seed_after=mitigated.seed,
    )


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise InputError(f"{where}: missing required field {key!r}")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{path}: must be a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{path}: must be an integer, got {value!r}")
    return value


def _check_version(obj: dict, where: str) -> None:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: document must be a JSON object")
    if obj.get("version") != 1:
        raise InputError(f"{where}: version must be 1")


_SCENARIO_KEYS = {"version", "seed", "groups"}
_GROUP_KEYS = {
    "group",
    "mated_mean",
    "mated_sd",
    "nonmated_mean",
    "nonmated_sd",
    "n_mated",
    "n_nonmated",
}
_MITIGATION_KEYS = {
    "version",
    "mode",
    "target_groups",
    "strength",
    "reference_offset",
    "mated_spread_gain",
}


def scenario_from_doc(obj: dict) -> ScenarioSpec:
    """Build a ScenarioSpec from a parsed configuration document.

    Documents carry ``version: 1``; unknown fields are rejected so config
    typos cannot silently change a simulation.
    """
    _check_version(obj, "scenario")
    unknown = set(obj) - _SCENARIO_KEYS
    if unknown:
        raise InputError(f"scenario: unknown fields {sorted(unknown)}")
    seed = _integer(_require(obj, "seed", "scenario"), "scenario.seed")
    raw_groups = _require(obj, "groups", "scenario")
    if not isinstance(raw_groups, list):
        raise InputError("scenario.groups: must be an array")
    groups = []
    for i, entry in enumerate(raw_groups):
        path = f"scenario.groups[{i}]"
        if not isinstance(entry, dict):
            raise InputError(f"{path}: must be an object")
        unknown = set(entry) - _GROUP_KEYS
        if unknown:
            raise InputError(f"{path}: unknown fields {sorted(unknown)}")
        try:
            groups.append(
                GroupDistribution(
                    group=_require(entry, "group", path),
                    mated_mean=_number(_require(entry, "mated_mean", path), f"{path}.mated_mean"),
                    mated_sd=_number(_require(entry, "mated_sd", path), f"{path}.mated_sd"),
                    nonmated_mean=_number(
                        _require(entry, "nonmated_mean", path), f"{path}.nonmated_mean"
                    ),
                    nonmated_sd=_number(
                        _require(entry, "nonmated_sd", path), f"{path}.nonmated_sd"
                    ),
                    n_mated=_integer(_require(entry, "n_mated", path), f"{path}.n_mated"),
                    n_nonmated=_integer(
                        _require(entry, "n_nonmated", path), f"{path}.n_nonmated"
                    ),
                )
            )
        except InputError as exc:
            raise InputError(f"{path}: {exc}") from None
    return ScenarioSpec(groups=tuple(groups), seed=seed)


def mitigation_from_doc(obj: dict) -> MitigationSpec:
    """Build a MitigationSpec from a parsed configuration document."""
    _check_version(obj, "mitigation")
    unknown = set(obj) - _MITIGATION_KEYS
    if unknown:
        raise InputError(f"mitigation: unknown fields {sorted(unknown)}")
    mode = _require(obj, "mode", "mitigation")
    targets = obj.get("target_groups", [])
    if not isinstance(targets, list) or not all(isinstance(g, str) for g in targets):
        raise InputError("mitigation.target_groups: must be an array of strings")
    return MitigationSpec(
        mode=mode,
        target_groups=tuple(targets),
        strength=_number(obj.get("strength", 1.0), "mitigation.strength"),
        reference_offset=_number(
            obj.get("reference_offset", 0.0), "mitigation.reference_offset"
        ),
        mated_spread_gain=_number(
            obj.get("mated_spread_gain", 0.0), "mitigation.mated_spread_gain"
        ),
    )
