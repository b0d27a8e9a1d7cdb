"""Small fully-connected ReLU network with manual gradients and Adam.

Everything is plain numpy so the arithmetic stays auditable and the
finite-difference gradient tests can probe the exact training path.
Dropout uses the inverted convention (activations scaled at train time)
and is only applied when a dropout rng is passed to forward().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class MlpSpec:
    """Network shape: hidden layer widths, dropout rate, and one output node
    per prediction time."""

    hidden: tuple[int, ...]
    out_dim: int
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if any(w < 1 for w in self.hidden):
            raise DataError("hidden widths must be >= 1")
        if self.out_dim < 1:
            raise DataError("output dimension must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError("dropout rate must lie in [0, 1)")


class Mlp:
    """Feed-forward ReLU net: weights W and biases b per layer, initialized
    uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""

    def __init__(self, in_dim: int, spec: MlpSpec, rng: np.random.Generator):
        if in_dim < 1:
            raise DataError("input dimension must be >= 1")
        self.in_dim = in_dim
        self.spec = spec
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        dims = [in_dim, *spec.hidden, spec.out_dim]
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(d_in)
            self.weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
            self.biases.append(rng.uniform(-bound, bound, size=d_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray, dropout_rng: np.random.Generator | None = None):
        """Return (logits, cache).  Dropout on hidden activations is active
        only when dropout_rng is given."""
        x = np.asarray(x, dtype=float)
        h = x
        pre_acts = []
        acts = [x]
        masks = []
        p = self.spec.dropout
        for k in range(self.n_layers - 1):
            u = h @ self.weights[k] + self.biases[k]
            h = np.maximum(u, 0.0)
            if dropout_rng is not None and p > 0.0:
                mask = (dropout_rng.random(h.shape) >= p) / (1.0 - p)
                h = h * mask
            else:
                mask = None
            pre_acts.append(u)
            masks.append(mask)
            acts.append(h)
        logits = h @ self.weights[-1] + self.biases[-1]
        return logits, (pre_acts, acts, masks)

    def backward(self, cache, grad_logits: np.ndarray):
        """Gradients of a scalar loss w.r.t. all weights and biases, given
        the loss gradient at the logits."""
        pre_acts, acts, masks = cache
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        dh = np.asarray(grad_logits, dtype=float)
        grads_w[-1] = acts[-1].T @ dh
        grads_b[-1] = dh.sum(axis=0)
        dh = dh @ self.weights[-1].T
        for k in range(self.n_layers - 2, -1, -1):
            if masks[k] is not None:
                dh = dh * masks[k]
            du = dh * (pre_acts[k] > 0)
            grads_w[k] = acts[k].T @ du
            grads_b[k] = du.sum(axis=0)
            if k > 0:
                dh = du @ self.weights[k].T
        return grads_w, grads_b

    def get_params(self) -> list[np.ndarray]:
        return [*(w.copy() for w in self.weights), *(b.copy() for b in self.biases)]

    def set_params(self, params: list[np.ndarray]) -> None:
        n = self.n_layers
        for k in range(n):
            if params[k].shape != self.weights[k].shape or params[n + k].shape != self.biases[k].shape:
                raise DataError("parameter shapes do not match the network")
        self.weights = [p.copy() for p in params[:n]]
        self.biases = [p.copy() for p in params[n:]]


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise DataError("learning rate must be > 0")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
