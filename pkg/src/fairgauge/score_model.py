"""Domain types for labeled comparison scores and their interchange formats.

A comparison set is the evaluation substrate: one record per scored
comparison, carrying a similarity score (higher = more similar), a mated
flag (same identity or not), and a demographic group token. By protocol a
non-mated record's group means both samples come from that group, which is
the pairing that matters for demographic-differential false match rates.

Two file formats are owned here:

* comparison CSV — UTF-8, comma-separated, header exactly
  ``score,mated,group``; mated is ``0`` or ``1``; scores accept scientific
  notation.
* rate-table JSON — keys ``groups`` (array), ``threshold_labels`` (array),
  ``fmr`` and ``fnmr`` (row-major group x threshold matrices of fractions),
  optional ``overall_fmr`` / ``overall_fnmr`` rows and a free-form ``meta``
  object. Rates outside [0, 1] are rejected, never clamped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, TextIO

import numpy as np

from .errors import InputError

if TYPE_CHECKING:
    from .rate_engine import ThresholdSet

COMPARISON_HEADER = "score,mated,group"

# Characters that would collide with the CSV record structure.
_FORBIDDEN_IN_GROUP = (",", "\n", "\r")

_RATE_TABLE_REQUIRED = ("groups", "threshold_labels", "fmr", "fnmr")
_RATE_TABLE_OPTIONAL = ("overall_fmr", "overall_fnmr", "meta")


def check_group_token(group: str) -> None:
    """Reject empty group tokens and tokens containing delimiter characters."""
    if not isinstance(group, str) or not group:
        raise InputError("group token must be a non-empty string")
    if any(ch in group for ch in _FORBIDDEN_IN_GROUP):
        raise InputError(f"group token {group!r} contains a delimiter character")


@dataclass(frozen=True)
class ComparisonRecord:
    """One scored comparison: similarity score, mated flag, group token."""

    score: float
    mated: bool
    group: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise InputError(f"score must be finite, got {self.score!r}")
        check_group_token(self.group)


class ComparisonSet:
    """Ordered, immutable collection of comparison records.

    Groups are derived in order of first appearance. At least one mated and
    one non-mated record must exist overall. All exposed numpy views are
    read-only, so instances are safe to share across threads.
    """

    def __init__(self, records: Iterable[ComparisonRecord]):
        self.records: tuple[ComparisonRecord, ...] = tuple(records)
        if not self.records:
            raise InputError("comparison set must contain at least one record")

        scores = np.empty(len(self.records), dtype=np.float64)
        mated = np.empty(len(self.records), dtype=bool)
        codes = np.empty(len(self.records), dtype=np.intp)
        groups: list[str] = []
        group_code: dict[str, int] = {}
        first_index: dict[str, int] = {}
        for i, rec in enumerate(self.records):
            scores[i] = rec.score
            mated[i] = rec.mated
            code = group_code.get(rec.group)
            if code is None:
                code = len(groups)
                group_code[rec.group] = code
                first_index[rec.group] = i
                groups.append(rec.group)
            codes[i] = code

        if not mated.any():
            raise InputError("comparison set has no mated records")
        if mated.all():
            raise InputError("comparison set has no non-mated records")

        for arr in (scores, mated, codes):
            arr.setflags(write=False)
        self._scores = scores
        self._mated = mated
        self._codes = codes
        self.groups: tuple[str, ...] = tuple(groups)
        self._group_code = group_code
        self._first_index = first_index

    def __len__(self) -> int:
        return len(self.records)

    @property
    def scores(self) -> np.ndarray:
        return self._scores

    @property
    def mated_mask(self) -> np.ndarray:
        return self._mated

    @property
    def mated_scores(self) -> np.ndarray:
        return self._scores[self._mated]

    @property
    def nonmated_scores(self) -> np.ndarray:
        return self._scores[~self._mated]

    def _code(self, group: str) -> int:
        try:
            return self._group_code[group]
        except KeyError:
            raise InputError(f"unknown group {group!r}") from None

    def group_scores(self, group: str, mated: bool) -> np.ndarray:
        """Scores of one group restricted to mated or non-mated records."""
        mask = (self._codes == self._code(group)) & (self._mated == mated)
        return self._scores[mask]

    def mated_count(self, group: str) -> int:
        return int(((self._codes == self._code(group)) & self._mated).sum())

    def nonmated_count(self, group: str) -> int:
        return int(((self._codes == self._code(group)) & ~self._mated).sum())

    def first_index(self, group: str) -> int:
        """Index of the group's first record (used to locate findings)."""
        return self._first_index[group]


def parse_comparisons(stream: str | TextIO) -> ComparisonSet:
    """Parse comparison CSV text into a :class:`ComparisonSet`.

    Accepts a string or a text file object. Raises :class:`InputError`
    naming the 1-based line of the first problem: missing or wrong header,
    wrong field count, malformed or non-finite score, mated flag outside
    {0, 1}, or an empty group token. Blank lines are skipped; record order
    is preserved.
    """
    text = stream.read() if hasattr(stream, "read") else stream
    lines = text.splitlines()
    if lines and lines[0].startswith("﻿"):
        lines[0] = lines[0][1:]
    if not lines or lines[0] != COMPARISON_HEADER:
        raise InputError(f"line 1: header must be exactly {COMPARISON_HEADER!r}")

    records: list[ComparisonRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise InputError(f"line {lineno}: expected 3 fields, got {len(fields)}")
        raw_score, raw_mated, group = fields
        try:
            score = float(raw_score)
        except ValueError:
            raise InputError(f"line {lineno}: malformed score {raw_score!r}") from None
        if not math.isfinite(score):
            raise InputError(f"line {lineno}: score must be finite, got {raw_score!r}")
        flag = raw_mated.strip()
        if flag not in ("0", "1"):
            raise InputError(f"line {lineno}: mated flag must be 0 or 1, got {raw_mated!r}")
        if not group:
            raise InputError(f"line {lineno}: empty group token")
        records.append(ComparisonRecord(score=score, mated=flag == "1", group=group))

    if not records:
        raise InputError("line 2: no data lines")
    return ComparisonSet(records)


def serialize_comparisons(cs: ComparisonSet) -> str:
    """Render a ComparisonSet back to CSV text.

    Scores are written with ``repr`` so parse -> serialize -> parse is an
    exact round trip.
    """
    lines = [COMPARISON_HEADER]
    lines.extend(
        f"{rec.score!r},{int(rec.mated)},{rec.group}" for rec in cs.records
    )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GroupRateTable:
    """FMR/FNMR per demographic group per threshold, plus overall rows.

    Matrices are group x threshold, stored as fractions in [0, 1].
    ``thresholds`` is populated when the table came out of the solver, None
    when it was parsed from a rate-table document.
    """

    groups: tuple[str, ...]
    threshold_labels: tuple[str, ...]
    fmr: np.ndarray
    fnmr: np.ndarray
    overall_fmr: np.ndarray | None = None
    overall_fnmr: np.ndarray | None = None
    thresholds: "ThresholdSet | None" = None

    def __post_init__(self) -> None:
        if len(self.groups) < 1:
            raise InputError("rate table needs at least one group")
        if len(set(self.groups)) != len(self.groups):
            raise InputError("rate table group ids must be unique")
        for g in self.groups:
            check_group_token(g)
        shape = (len(self.groups), len(self.threshold_labels))
        for name in ("fmr", "fnmr"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise InputError(
                    f"{name} matrix shape {arr.shape} does not match "
                    f"{len(self.groups)} groups x {len(self.threshold_labels)} thresholds"
                )
            _check_rates(arr, name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("overall_fmr", "overall_fnmr"):
            row = getattr(self, name)
            if row is None:
                continue
            arr = np.asarray(row, dtype=np.float64)
            if arr.shape != (len(self.threshold_labels),):
                raise InputError(f"{name} must have one entry per threshold")
            _check_rates(arr, name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def fmr_at(self, label: str) -> np.ndarray:
        """Per-group FMR column for one threshold label."""
        return self.fmr[:, self.threshold_labels.index(label)]

    def fnmr_at(self, label: str) -> np.ndarray:
        return self.fnmr[:, self.threshold_labels.index(label)]


def _check_rates(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains a non-finite rate")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        bad = arr[(arr < 0.0) | (arr > 1.0)].flat[0]
        raise InputError(f"{name} rate {bad} outside [0, 1]")


def parse_rate_table(doc: str) -> GroupRateTable:
    """Parse a rate-table JSON document into a validated GroupRateTable."""
    try:
        obj = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise InputError(f"rate table is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise InputError("rate table document must be a JSON object")
    unknown = set(obj) - set(_RATE_TABLE_REQUIRED) - set(_RATE_TABLE_OPTIONAL)
    if unknown:
        raise InputError(f"rate table has unknown keys: {sorted(unknown)}")
    missing = [k for k in _RATE_TABLE_REQUIRED if k not in obj]
    if missing:
        raise InputError(f"rate table missing keys: {missing}")

    groups = obj["groups"]
    labels = obj["threshold_labels"]
    if not isinstance(groups, list) or not all(isinstance(g, str) for g in groups):
        raise InputError("groups must be an array of strings")
    if not isinstance(labels, list) or not all(isinstance(t, str) for t in labels):
        raise InputError("threshold_labels must be an array of strings")
    if len(set(labels)) != len(labels):
        raise InputError("threshold_labels must be unique")

    def matrix(key: str) -> np.ndarray:
        rows = obj[key]
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise InputError(f"{key} must be a row-major matrix (array of arrays)")
        for r in rows:
            for v in r:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise InputError(f"{key} contains a non-numeric entry {v!r}")
        if len(rows) != len(groups) or any(len(r) != len(labels) for r in rows):
            raise InputError(
                f"{key} must be {len(groups)} rows x {len(labels)} columns"
            )
        return np.array(rows, dtype=np.float64)

    def row(key: str) -> np.ndarray | None:
        if key not in obj:
            return None
        values = obj[key]
        if not isinstance(values, list):
            raise InputError(f"{key} must be an array")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"{key} contains a non-numeric entry {v!r}")
        return np.array(values, dtype=np.float64)

    return GroupRateTable(
        groups=tuple(groups),
        threshold_labels=tuple(labels),
        fmr=matrix("fmr"),
        fnmr=matrix("fnmr"),
        overall_fmr=row("overall_fmr"),
        overall_fnmr=row("overall_fnmr"),
    )


def rate_table_doc(table: GroupRateTable, ndigits: int | None = None) -> dict:
    """Serialize a GroupRateTable to the rate-table document structure."""

    def conv(arr: np.ndarray) -> list:
        values = arr.tolist()
        if ndigits is None:
            return values
        if values and isinstance(values[0], list):
            return [[round(v, ndigits) for v in r] for r in values]
        return [round(v, ndigits) for v in values]

    doc: dict = {
        "groups": list(table.groups),
        "threshold_labels": list(table.threshold_labels),
        "fmr": conv(table.fmr),
        "fnmr": conv(table.fnmr),
    }
    if table.overall_fmr is not None:
        doc["overall_fmr"] = conv(table.overall_fmr)
    if table.overall_fnmr is not None:
        doc["overall_fnmr"] = conv(table.overall_fnmr)
    return doc


@dataclass(frozen=True)
class ValidationReport:
    """Findings from validate_set: blocking errors and advisory warnings."""

    errors: tuple[tuple[int, str], ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_set(
    cs: ComparisonSet,
    min_target: float = 0.001,
    thin_count: int = 30,
) -> ValidationReport:
    """Check that every group is usable for per-group rate estimation.

    Errors make the set unusable: a group with no mated or no non-mated
    records has undefined FNMR or FMR. Warnings flag thin groups: fewer
    than ``thin_count`` records on either side, or too few non-mated
    records to resolve the smallest FMR target (empirical resolution
    1/count coarser than ``min_target``).
    """
    errors: list[tuple[int, str]] = []
    warnings: list[str] = []
    need = math.ceil(1.0 / min_target)
    for group in cs.groups:
        n_mated = cs.mated_count(group)
        n_nonmated = cs.nonmated_count(group)
        idx = cs.first_index(group)
        if n_mated == 0:
            errors.append((idx, f"group {group!r} has no mated records"))
        elif n_mated < thin_count:
            warnings.append(f"group {group!r}: only {n_mated} mated records")
        if n_nonmated == 0:
            errors.append((idx, f"group {group!r} has no non-mated records"))
        else:
            if n_nonmated < need:
                warnings.append(
                    f"group {group!r}: {n_nonmated} non-mated records are "
                    f"insufficient for FMR={min_target:.1%} resolution "
                    f"(needs >= {need})"
                )
            if n_nonmated < thin_count:
                warnings.append(
                    f"group {group!r}: only {n_nonmated} non-mated records"
                )
    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))
