"""Discrete-time survival predictors and their losses.

Two trainable models share one MLP backbone:

* hazard model: the network output passes through a sigmoid to give the
  conditional event probability per grid time; survival is the cumulative
  product of (1 - hazard), trained by the right-censored Bernoulli
  negative log-likelihood.
* binary-classifier (BCE) model: each output node is an independent
  classifier of survival past that grid time, trained by binary
  cross-entropy after dropping subjects censored before the node's time.
  Its survival estimates are not monotone by construction and are biased
  low under censoring; the closed-form population minimizer of that loss
  is provided for analysis.

Also here: survival reconstruction from hazards, piecewise-linear
interpolation of survival estimates to a finer grid, and JSON checkpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    DataError,
    NumericError,
    RightCensoredDataset,
    SurvivalPrediction,
    TimeGrid,
    discretize_duration,
)
from .nnet import Adam, Mlp, MlpSpec, sigmoid

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise DataError("learning rate and batch size must be positive")
        if self.max_epochs < 0:
            raise DataError("max_epochs must be >= 0")
        if self.patience < 1:
            raise DataError("patience must be >= 1")


class TrainingDiverged(NumericError):
    """Non-finite loss during training; carries the epoch and the loss
    trajectory up to the failure."""

    def __init__(self, epoch: int, history):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.history = history


def discretize_labels(data: RightCensoredDataset, grid: TimeGrid):
    """Map observed durations to grid indices (smallest grid time >= T)."""
    idx, _ = discretize_duration(data.durations, grid)
    return idx, data.events.copy()


def survival_from_hazards(hazards, grid: TimeGrid) -> SurvivalPrediction:
    """Survival as the running product of (1 - hazard) along the grid."""
    h = np.asarray(hazards, dtype=float)
    if h.ndim != 2 or h.shape[1] != len(grid):
        raise DataError("hazards must be an n x m matrix matching the grid")
    if np.any(h < 0) or np.any(h > 1):
        raise DataError("hazards must lie in [0, 1]")
    return SurvivalPrediction(grid, np.cumprod(1.0 - h, axis=1))


def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_label_masks(idx, events, m: int):
    """Per-(subject, time) classifier labels.

    Returns (survived, failed): survived marks times the subject is known to
    survive past; failed marks times with a known earlier event.  Subjects
    censored before a time contribute to neither there.
    """
    idx = np.asarray(idx)
    events = np.asarray(events)
    cols = np.arange(m)[None, :]
    survived = idx[:, None] > cols
    failed = (idx[:, None] <= cols) & (events[:, None] == 1)
    return survived, failed


def bce_loss_matrix(pi, idx, events) -> np.ndarray:
    """Per-(subject, time) binary cross-entropy contributions (>= 0)."""
    pi = _clamp(np.asarray(pi, dtype=float))
    survived, failed = bce_label_masks(idx, events, pi.shape[1])
    return -(survived * np.log(pi) + failed * np.log1p(-pi))


def bce_multi_loss(pi, idx, events):
    """Summed binary cross-entropy over all times and subjects.

    Returns (loss, gradient w.r.t. pi).  The gradient is zero wherever the
    subject is excluded (censored before the time) and wherever clamping is
    active.
    """
    pi = np.asarray(pi, dtype=float)
    clamped = _clamp(pi)
    survived, failed = bce_label_masks(idx, events, pi.shape[1])
    loss = float(-(survived * np.log(clamped) + failed * np.log1p(-clamped)).sum())
    if not np.isfinite(loss):
        raise NumericError("non-finite binary cross-entropy")
    interior = (pi > PROB_CLAMP) & (pi < 1.0 - PROB_CLAMP)
    grad = (-survived / clamped + failed / (1.0 - clamped)) * interior
    return loss, grad


def logistic_hazard_nll(hazards, idx, events):
    """Right-censored discrete-time negative log-likelihood.

    Bernoulli likelihood of the event indicator at every at-risk time up to
    and including the observed duration.  Returns (loss, gradient w.r.t. the
    pre-sigmoid logits), using the identity dloss/dlogit = at_risk * (h - y).
    """
    h = np.asarray(hazards, dtype=float)
    idx = np.asarray(idx)
    events = np.asarray(events)
    m = h.shape[1]
    cols = np.arange(m)[None, :]
    at_risk = idx[:, None] >= cols
    is_event = (idx[:, None] == cols) & (events[:, None] == 1)
    hc = _clamp(h)
    loss = float(-(is_event * np.log(hc) + (at_risk & ~is_event) * np.log1p(-hc)).sum())
    if not np.isfinite(loss):
        raise NumericError("non-finite hazard likelihood")
    grad_logits = at_risk * (hc - is_event)
    return loss, grad_logits


class _FittedNet:
    """Trained MLP plus its prediction grid; base for both model kinds."""

    def __init__(self, net: Mlp, grid: TimeGrid):
        if net.spec.out_dim != len(grid):
            raise DataError("network output dimension must match the grid")
        self.net = net
        self.grid = grid

    @property
    def spec(self) -> MlpSpec:
        return self.net.spec

    def _logits(self, covariates) -> np.ndarray:
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.net.in_dim:
            raise DataError("covariate dimension does not match the model")
        logits, _ = self.net.forward(x)
        return logits


class HazardModel(_FittedNet):
    """Sigmoid-output discrete hazards; survival by cumulative product."""

    kind = "logistic-hazard"

    def predict_hazards(self, covariates) -> np.ndarray:
        return _clamp(sigmoid(self._logits(covariates)))

    def predict_survival(self, covariates) -> SurvivalPrediction:
        return survival_from_hazards(self.predict_hazards(covariates), self.grid)


class BceModel(_FittedNet):
    """Per-time binary classifiers; the sigmoid outputs are the survival
    estimates directly (not monotone in time)."""

    kind = "bce"

    def predict_survival(self, covariates) -> SurvivalPrediction:
        return SurvivalPrediction(self.grid, _clamp(sigmoid(self._logits(covariates))))


MODEL_KINDS = {"logistic-hazard": HazardModel, "bce": BceModel}


@dataclass
class TrainResult:
    model: HazardModel | BceModel
    history: list[tuple[int, float, float]]  # (epoch, train_loss, valid_loss)
    best_epoch: int


def _batch_loss_and_logit_grad(kind: str, logits, idx, events):
    if kind == "logistic-hazard":
        h = sigmoid(logits)
        return logistic_hazard_nll(h, idx, events)
    pi = sigmoid(logits)
    loss, dpi = bce_multi_loss(pi, idx, events)
    return loss, dpi * pi * (1.0 - pi)


def _mean_loss(kind: str, net: Mlp, x, idx, events) -> float:
    logits, _ = net.forward(x)
    loss, _ = _batch_loss_and_logit_grad(kind, logits, idx, events)
    return loss / x.shape[0]


def train(
    kind: str,
    train_data: RightCensoredDataset,
    valid_data: RightCensoredDataset,
    grid: TimeGrid,
    spec: MlpSpec,
    config: TrainConfig,
) -> TrainResult:
    """Fit a model by minibatch Adam with early stopping.

    Deterministic for a fixed seed: one generator drives initialization,
    shuffling, and dropout.  The returned parameters are those of the epoch
    with the best validation loss (ties keep the earlier epoch, including
    the untrained state); a non-finite loss aborts with the trajectory.
    """
    if kind not in MODEL_KINDS:
        raise DataError(f"unknown model kind: {kind!r}")
    if train_data.covariate_dim != valid_data.covariate_dim:
        raise DataError("train and validation covariate dimensions differ")
    rng = np.random.default_rng(config.seed)
    net = Mlp(train_data.covariate_dim, spec, rng)

    x_train = train_data.covariates
    idx_train, ev_train = discretize_labels(train_data, grid)
    x_valid = valid_data.covariates
    idx_valid, ev_valid = discretize_labels(valid_data, grid)

    best_params = net.get_params()
    best_valid = _mean_loss(kind, net, x_valid, idx_valid, ev_valid)
    if not np.isfinite(best_valid):
        raise TrainingDiverged(0, [])
    best_epoch = 0

    optimizer = Adam(config.learning_rate)
    params = net.weights + net.biases
    history: list[tuple[int, float, float]] = []
    since_best = 0
    n = len(train_data)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb = x_train[batch]
            logits, cache = net.forward(xb, dropout_rng=rng)
            loss, grad_logits = _batch_loss_and_logit_grad(kind, logits, idx_train[batch], ev_train[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, history)
            grads_w, grads_b = net.backward(cache, grad_logits / xb.shape[0])
            optimizer.step(params, grads_w + grads_b)
            epoch_loss += loss
        valid_loss = _mean_loss(kind, net, x_valid, idx_valid, ev_valid)
        if not np.isfinite(valid_loss):
            raise TrainingDiverged(epoch, history)
        history.append((epoch, epoch_loss / n, valid_loss))
        if valid_loss < best_valid:
            best_valid = valid_loss
            best_params = net.get_params()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    net.set_params(best_params)
    model = MODEL_KINDS[kind](net, grid)
    return TrainResult(model, history, best_epoch)


def interpolate_cdi(pred: SurvivalPrediction, fine: TimeGrid) -> SurvivalPrediction:
    """Piecewise-linear interpolation of survival values onto a finer grid.

    Values before the first prediction time interpolate from S(0) = 1; times
    beyond the last prediction time are an error.  Non-monotone rows (from
    the BCE method) interpolate as-is without monotonizing.
    """
    t_max = pred.grid.times[-1]
    if fine.times[-1] > t_max:
        raise DataError("interpolation grid extends beyond the prediction grid")
    xs = np.concatenate([[0.0], pred.grid.times])
    out = np.empty((pred.n_subjects, len(fine)))
    for i in range(pred.n_subjects):
        ys = np.concatenate([[1.0], pred.values[i]])
        out[i] = np.interp(fine.times, xs, ys)
    return SurvivalPrediction(fine, out)


def bce_population_minimizer(survival, censor_survival, density) -> np.ndarray:
    """Pointwise minimizer of the expected per-time binary cross-entropy.

    Inputs are aligned arrays on one grid: the true survival S, the
    censoring survival G (evaluated at the grid times), and the event
    density masses f, with S the survival of f.  Returns
    S(t)G(t) / (S(t)G(t) + cumsum(G(t-) f(t))), with 0 where both numerator
    and denominator vanish (the step-censoring limit).
    """
    s = np.asarray(survival, dtype=float)
    g = np.asarray(censor_survival, dtype=float)
    f = np.asarray(density, dtype=float)
    if not (s.shape == g.shape == f.shape) or s.ndim != 1:
        raise DataError("survival, censor survival, and density must be aligned vectors")
    if np.any(s < 0) or np.any(s > 1) or np.any(g < 0) or np.any(g > 1):
        raise DataError("survival values must lie in [0, 1]")
    if np.any(f < 0) or f.sum() > 1 + 1e-9:
        raise DataError("density masses must be >= 0 and sum to at most 1")
    g_left = np.concatenate([[1.0], g[:-1]])
    num = s * g
    den = num + np.cumsum(g_left * f)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def model_to_json(model: HazardModel | BceModel) -> dict:
    """Checkpoint document; floats keep exact binary64 round-trip via repr."""
    net = model.net
    return {
        "kind": model.kind,
        "grid": model.grid.times.tolist(),
        "in_dim": net.in_dim,
        "spec": {"hidden": list(net.spec.hidden), "out_dim": net.spec.out_dim, "dropout": net.spec.dropout},
        "layers": [
            {"w": w.tolist(), "b": b.tolist()} for w, b in zip(net.weights, net.biases)
        ],
    }


def model_from_json(doc: dict) -> HazardModel | BceModel:
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise DataError(f"unknown checkpoint kind: {kind!r}")
    spec = MlpSpec(tuple(doc["spec"]["hidden"]), int(doc["spec"]["out_dim"]), float(doc["spec"]["dropout"]))
    grid = TimeGrid(np.asarray(doc["grid"], dtype=float))
    net = Mlp(int(doc["in_dim"]), spec, np.random.default_rng(0))
    weights = [np.asarray(layer["w"], dtype=float) for layer in doc["layers"]]
    biases = [np.asarray(layer["b"], dtype=float) for layer in doc["layers"]]
    net.set_params(weights + biases)
    return MODEL_KINDS[kind](net, grid)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
