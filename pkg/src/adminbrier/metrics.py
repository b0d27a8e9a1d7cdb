"""Scoring rules for survival predictions.

Implements the mean squared error against true survival curves, the
uncensored Brier score, the inverse-probability-of-censoring-weighted (IPCW)
Brier score with weight capping and weight-sum normalization, the
administrative Brier score for data where every censoring time is known, and
the closed-form expected Brier score used as a test oracle.

All scores are evaluated exactly at the prediction grid; callers needing
other times interpolate the predictions first.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DataError,
    NumericError,
    RightCensoredDataset,
    StepSurvival,
    SurvivalPrediction,
    TimeGrid,
    _format_float,
)


@dataclass(frozen=True)
class WeightCap:
    """Upper bound on the inverse censoring weight 1/G.

    A bounded cap keeps weights finite even where the censoring survival
    estimate hits zero; max_weight=inf disables capping.
    """

    max_weight: float = math.inf

    def __post_init__(self):
        if not self.max_weight >= 1:
            raise DataError("max_weight must be >= 1")

    @classmethod
    def unbounded(cls) -> "WeightCap":
        return cls(math.inf)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.max_weight)


@dataclass(frozen=True)
class ScoreCurve:
    """Metric value per grid time plus the effective sample size.

    Times with effective_n == 0 carry NaN scores (missing, not zero).  Scores
    are nonnegative; the normalized IPCW and administrative forms also stay
    within [0, 1], but the divide-by-n IPCW form with unbounded weights can
    exceed 1 on a single realization.
    """

    grid: TimeGrid
    score: np.ndarray
    effective_n: np.ndarray

    def __post_init__(self):
        score = np.asarray(self.score, dtype=float)
        eff = np.asarray(self.effective_n, dtype=float)
        m = len(self.grid)
        if score.shape != (m,) or eff.shape != (m,):
            raise DataError("score and effective_n must match the grid length")
        if np.any(eff < 0):
            raise DataError("effective_n must be >= 0")
        defined = eff > 0
        if not np.all(np.isnan(score[~defined])):
            raise DataError("scores must be missing (NaN) where effective_n == 0")
        if np.any(score[defined] < 0):
            raise DataError("scores must be >= 0 where defined")
        score.flags.writeable = False
        eff.flags.writeable = False
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "effective_n", eff)

    def mean_over(self, t_min: float, t_max: float) -> float:
        """Mean of defined scores at grid times in [t_min, t_max]."""
        sel = (self.grid.times >= t_min) & (self.grid.times <= t_max)
        vals = self.score[sel]
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise NumericError(f"no defined scores in [{t_min}, {t_max}]")
        return float(vals.mean())


def _check_same_shape(a: SurvivalPrediction, b: SurvivalPrediction) -> None:
    if a.grid != b.grid:
        raise DataError("predictions must share the same time grid")
    if a.values.shape != b.values.shape:
        raise DataError("predictions must cover the same subjects")


def mse_curve(true_surv: SurvivalPrediction, pred: SurvivalPrediction) -> ScoreCurve:
    """Mean squared error of the estimates against the true survival curves."""
    _check_same_shape(true_surv, pred)
    score = np.mean((true_surv.values - pred.values) ** 2, axis=0)
    n = float(pred.n_subjects)
    return ScoreCurve(pred.grid, score, np.full(len(pred.grid), n))


def expected_brier_oracle(true_surv: SurvivalPrediction, pred: SurvivalPrediction) -> ScoreCurve:
    """Closed-form expected Brier score: MSE plus the irreducible term
    mean(S(t) * (1 - S(t)))."""
    _check_same_shape(true_surv, pred)
    s = true_surv.values
    irreducible = np.mean(s * (1.0 - s), axis=0)
    mse = np.mean((s - pred.values) ** 2, axis=0)
    n = float(pred.n_subjects)
    return ScoreCurve(pred.grid, mse + irreducible, np.full(len(pred.grid), n))


def brier_uncensored(event_times, pred: SurvivalPrediction) -> ScoreCurve:
    """Brier score when every event time is known (uncensored test set)."""
    t_star = np.asarray(event_times, dtype=float)
    if t_star.shape != (pred.n_subjects,):
        raise DataError("event_times must align with the prediction rows")
    alive = (t_star[:, None] > pred.grid.times[None, :]).astype(float)
    score = np.mean((alive - pred.values) ** 2, axis=0)
    n = float(pred.n_subjects)
    return ScoreCurve(pred.grid, score, np.full(len(pred.grid), n))


def _censor_surv_matrices(censor_surv, data: RightCensoredDataset, grid: TimeGrid):
    """Evaluate per-subject censoring survival at grid times and at each
    subject's duration from the left."""
    n = len(data)
    if isinstance(censor_surv, StepSurvival):
        g_row = censor_surv.eval_right(grid.times)
        g_at_t = np.broadcast_to(g_row, (n, len(grid)))
        g_left = censor_surv.eval_left(data.durations)
        return g_at_t, np.asarray(g_left, dtype=float)
    curves: Sequence[StepSurvival] = list(censor_surv)
    if len(curves) != n:
        raise DataError("need one censoring survival function per subject")
    g_at_t = np.empty((n, len(grid)))
    g_left = np.empty(n)
    for i, curve in enumerate(curves):
        g_at_t[i] = curve.eval_right(grid.times)
        g_left[i] = curve.eval_left(float(data.durations[i]))
    return g_at_t, g_left


def _capped_inverse(g, cap: WeightCap, needed) -> np.ndarray:
    """min(1/g, max_weight), only valid where `needed`; raises on 1/0 when
    the cap is unbounded and the weight is actually used."""
    g = np.asarray(g, dtype=float)
    zero_needed = (g == 0) & needed
    if np.any(zero_needed) and not cap.bounded:
        raise NumericError("zero censoring survival requires a bounded weight cap")
    safe = np.where(g > 0, g, 1.0)
    w = np.where(g > 0, 1.0 / safe, math.inf)
    return np.minimum(w, cap.max_weight)


def brier_ipcw(
    data: RightCensoredDataset,
    pred: SurvivalPrediction,
    censor_surv,
    cap: WeightCap = WeightCap.unbounded(),
    normalize: bool = True,
) -> ScoreCurve:
    """Inverse-probability-of-censoring-weighted Brier score.

    Each observed-event contribution pi(t)^2 * 1{T<=t, D=1} is weighted by
    1/G(T-) and each still-at-risk contribution (1-pi(t))^2 * 1{T>t} by
    1/G(t); weights are capped at cap.max_weight before use.  With
    normalize=True the sum is divided by the sum of the capped weights, which
    keeps the score within [0, 1]; otherwise it is divided by n.

    censor_surv is a single StepSurvival shared by all subjects or a sequence
    with one per subject.  Times where the weight sum is zero report a
    missing score.
    """
    if pred.n_subjects != len(data):
        raise DataError("prediction rows must align with the dataset")
    times = pred.grid.times
    g_at_t, g_left = _censor_surv_matrices(censor_surv, data, pred.grid)

    event_ind = ((data.durations[:, None] <= times[None, :]) & (data.events[:, None] == 1)).astype(float)
    surv_ind = (data.durations[:, None] > times[None, :]).astype(float)

    w_event = _capped_inverse(g_left, cap, needed=np.any(event_ind > 0, axis=1))
    w_surv = _capped_inverse(g_at_t, cap, needed=surv_ind > 0)

    contrib = pred.values**2 * event_ind * w_event[:, None] + (1.0 - pred.values) ** 2 * surv_ind * w_surv
    weight_sum = (event_ind * w_event[:, None]).sum(axis=0) + (surv_ind * w_surv).sum(axis=0)

    denom = weight_sum if normalize else float(len(data))
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(weight_sum > 0, contrib.sum(axis=0) / denom, np.nan)
    return ScoreCurve(pred.grid, score, weight_sum)


def brier_admin(data: RightCensoredDataset, pred: SurvivalPrediction) -> ScoreCurve:
    """Administrative Brier score.

    At each time t only subjects whose known censoring time satisfies
    C* >= t are scored; for them the survival status at t is known exactly
    (a subject censored at C* >= t has its event strictly later, since ties
    count as events).  No censoring distribution is estimated.
    """
    if not data.admin_complete:
        raise DataError("administrative Brier score needs admin-complete data")
    if pred.n_subjects != len(data):
        raise DataError("prediction rows must align with the dataset")
    times = pred.grid.times
    included = (data.admin_censor_times[:, None] >= times[None, :]).astype(float)
    # 1{T* > t}: exact for events; censored subjects in the included set
    # are known to survive past t.
    alive = np.where(
        data.events[:, None] == 1,
        (data.durations[:, None] > times[None, :]).astype(float),
        1.0,
    )
    counts = included.sum(axis=0)
    sq = (alive - pred.values) ** 2 * included
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(counts > 0, sq.sum(axis=0) / counts, np.nan)
    return ScoreCurve(pred.grid, score, counts)


def write_score_csv(curve: ScoreCurve, path) -> None:
    """Write `time,score,effective_n` rows; missing scores become empty
    fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "score", "effective_n"])
        for t, s, n in zip(curve.grid.times, curve.score, curve.effective_n):
            writer.writerow([_format_float(t), "" if math.isnan(s) else _format_float(s), _format_float(n)])


def read_score_csv(path) -> ScoreCurve:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time", "score", "effective_n"]:
            raise DataError(f"{path}: expected header time,score,effective_n")
        times, scores, effs = [], [], []
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            scores.append(math.nan if row[1] == "" else float(row[1]))
            effs.append(float(row[2]))
    if not times:
        raise DataError(f"{path}: no data rows")
    return ScoreCurve(TimeGrid(np.asarray(times)), np.asarray(scores), np.asarray(effs))
