"""Shared domain types for right-censored survival data.

Provides the evaluation time grid, subject records and dataset containers,
right-continuous step survival functions, duration discretization, and the
dataset CSV format used by the command-line tools.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a structural requirement."""


class NumericError(RuntimeError):
    """Raised when a computation cannot proceed numerically."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing, nonnegative evaluation time points."""

    times: np.ndarray

    def __post_init__(self):
        times = _as_float_array(self.times, "times")
        if times.size == 0:
            raise DataError("time grid must be non-empty")
        if times[0] < 0:
            raise DataError("time grid values must be >= 0")
        if np.any(np.diff(times) <= 0):
            raise DataError("time grid must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @classmethod
    def regular(cls, m: int, t_max: float) -> "TimeGrid":
        """Grid of m equidistant points t_max/m, 2*t_max/m, ..., t_max."""
        if m < 1:
            raise DataError("grid size must be >= 1")
        return cls(t_max / m * np.arange(1, m + 1))

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)


def discretize_duration(t, grid: TimeGrid):
    """Map durations to grid indices: smallest j with grid.times[j] >= t.

    Durations beyond the last grid point clamp to the last index.  Returns
    (indices, clamped) where clamped marks the clamped entries; scalars in
    give scalars out.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DataError("durations must be >= 0")
    idx = np.searchsorted(grid.times, t_arr, side="left")
    clamped = idx >= len(grid)
    idx = np.minimum(idx, len(grid) - 1)
    if np.isscalar(t) or t_arr.ndim == 0:
        return int(idx), bool(clamped)
    return idx.astype(np.int64), clamped


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous piecewise-constant survival function.

    The function is 1 before the first jump; after jump_times[k] it takes
    post_jump_values[k].  Values must be nonincreasing and lie in [0, 1].
    """

    jump_times: np.ndarray
    post_jump_values: np.ndarray

    def __post_init__(self):
        times = _as_float_array(self.jump_times, "jump_times")
        values = _as_float_array(self.post_jump_values, "post_jump_values")
        if times.size != values.size:
            raise DataError("jump_times and post_jump_values must align")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise DataError("jump times must be strictly increasing")
            if times[0] < 0:
                raise DataError("jump times must be >= 0")
            if np.any(values < 0) or np.any(values > 1):
                raise DataError("survival values must lie in [0, 1]")
            if np.any(np.diff(values) > 0):
                raise DataError("survival values must be nonincreasing")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "post_jump_values", values)

    @classmethod
    def constant_one(cls) -> "StepSurvival":
        return cls(np.empty(0), np.empty(0))

    def _eval(self, t, side: str):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise DataError("evaluation times must be >= 0")
        if self.jump_times.size == 0:
            out = np.ones(t_arr.shape)
        else:
            idx = np.searchsorted(self.jump_times, t_arr, side=side) - 1
            out = np.where(idx >= 0, self.post_jump_values[np.maximum(idx, 0)], 1.0)
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(out)
        return out

    def eval_right(self, t):
        """f(t) under the right-continuous convention."""
        return self._eval(t, "right")

    def eval_left(self, t):
        """Left limit lim_{s -> t-} f(s); returns 1 at t = 0 by convention."""
        return self._eval(t, "left")


@dataclass(frozen=True)
class SubjectRecord:
    """One observed subject: duration, event indicator, optional known
    administrative censoring time, and covariates."""

    duration: float
    event: int
    admin_censor_time: float | None
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "covariates", np.asarray(self.covariates, dtype=float))


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str

    def __str__(self) -> str:
        return f"record {self.index}: {self.rule}"


class RightCensoredDataset:
    """Columnar container of right-censored observations.

    Either every subject carries a known administrative censoring time
    (admin-complete) or none does.
    """

    def __init__(self, durations, events, covariates, admin_censor_times=None):
        self.durations = _as_float_array(durations, "durations")
        self.events = np.asarray(events, dtype=np.int64)
        self.covariates = np.asarray(covariates, dtype=float)
        if self.covariates.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        n = self.durations.size
        if self.events.shape != (n,) or self.covariates.shape[0] != n:
            raise DataError("durations, events, and covariates must align")
        if not np.all(np.isfinite(self.durations)):
            raise DataError("durations must be finite")
        if not np.all((self.events == 0) | (self.events == 1)):
            raise DataError("events must be 0 or 1")
        if admin_censor_times is None:
            self.admin_censor_times = None
        else:
            self.admin_censor_times = _as_float_array(admin_censor_times, "admin_censor_times")
            if self.admin_censor_times.shape != (n,):
                raise DataError("admin_censor_times must align with durations")
        for arr in (self.durations, self.events, self.covariates):
            arr.flags.writeable = False
        if self.admin_censor_times is not None:
            self.admin_censor_times.flags.writeable = False

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord]) -> "RightCensoredDataset":
        records = list(records)
        if not records:
            raise DataError("dataset must contain at least one record")
        has_admin = [r.admin_censor_time is not None for r in records]
        if any(has_admin) and not all(has_admin):
            raise DataError("either every record has admin_censor_time or none does")
        admin = [r.admin_censor_time for r in records] if all(has_admin) else None
        return cls(
            durations=[r.duration for r in records],
            events=[r.event for r in records],
            covariates=np.vstack([r.covariates for r in records]),
            admin_censor_times=admin,
        )

    def __len__(self) -> int:
        return self.durations.size

    @property
    def covariate_dim(self) -> int:
        return self.covariates.shape[1]

    @property
    def admin_complete(self) -> bool:
        return self.admin_censor_times is not None

    def record(self, i: int) -> SubjectRecord:
        admin = None if self.admin_censor_times is None else float(self.admin_censor_times[i])
        return SubjectRecord(float(self.durations[i]), int(self.events[i]), admin, self.covariates[i])

    @property
    def records(self) -> list[SubjectRecord]:
        return [self.record(i) for i in range(len(self))]


def validate_dataset(data: RightCensoredDataset) -> list[Violation]:
    """Check per-subject invariants; returns violations rather than raising.

    Ties between event and admin censoring time resolve to the event, so an
    event exactly at the censoring time is valid.
    """
    violations: list[Violation] = []
    for i in range(len(data)):
        t = data.durations[i]
        if t < 0:
            violations.append(Violation(i, "negative duration"))
        if not np.all(np.isfinite(data.covariates[i])):
            violations.append(Violation(i, "non-finite covariate"))
        if data.admin_censor_times is None:
            continue
        c = data.admin_censor_times[i]
        if c < 0:
            violations.append(Violation(i, "negative admin censoring time"))
        if data.events[i] == 1 and t > c:
            violations.append(Violation(i, "event after admin censoring"))
        if data.events[i] == 0 and t != c:
            violations.append(Violation(i, "censored before admin time"))
    return violations


def _format_float(x: float) -> str:
    return repr(float(x))


def write_dataset_csv(data: RightCensoredDataset, path) -> None:
    """Write `duration,event,censor_time,x0,...` rows; censor_time empty when
    the dataset is not admin-complete.  Floats use repr so files round-trip
    and rerun byte-identically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["duration", "event", "censor_time"] + [f"x{j}" for j in range(data.covariate_dim)]
        writer.writerow(header)
        for i in range(len(data)):
            censor = "" if data.admin_censor_times is None else _format_float(data.admin_censor_times[i])
            row = [_format_float(data.durations[i]), str(int(data.events[i])), censor]
            row.extend(_format_float(x) for x in data.covariates[i])
            writer.writerow(row)


def read_dataset_csv(path) -> RightCensoredDataset:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header[:3] != ["duration", "event", "censor_time"]:
            raise DataError(f"{path}: expected header duration,event,censor_time,x0,...")
        durations, events, censors, rows = [], [], [], []
        for row in reader:
            if not row:
                continue
            durations.append(float(row[0]))
            events.append(int(row[1]))
            censors.append(None if row[2] == "" else float(row[2]))
            rows.append([float(x) for x in row[3:]])
    if not durations:
        raise DataError(f"{path}: no data rows")
    has_admin = [c is not None for c in censors]
    if any(has_admin) and not all(has_admin):
        raise DataError(f"{path}: censor_time must be present for all rows or none")
    admin = censors if all(has_admin) else None
    return RightCensoredDataset(durations, events, np.asarray(rows, dtype=float), admin)


@dataclass(frozen=True)
class SurvivalPrediction:
    """Per-subject survival estimates on a time grid (n subjects x m times).

    Rows from hazard-based models are nonincreasing in time; rows from the
    binary-classifier method need not be, and consumers must accept both.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("prediction values must be an n x m matrix")
        if values.shape[1] != len(self.grid):
            raise DataError("prediction columns must match the time grid")
        if np.any(values < 0) or np.any(values > 1):
            raise DataError("survival estimates must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]
