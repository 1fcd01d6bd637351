"""Noise-prediction MLP with hand-written reverse-mode gradients.

The network input is ``[x_t, embed(t), c]``; hidden layers use ``tanh``
(smooth, with a nonzero derivative everywhere) and the output layer is linear
with width equal to the data dimension.  Parameters are float64 arrays kept in
declaration order ``W0, b0, W1, b1, ...`` with ``W`` shaped ``(fan_in, fan_out)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError
from .schedule import DiffusionSchedule

ACTIVATION = "tanh"


@dataclass(frozen=True)
class TimeEmbedding:
    width: int = 16
    base: float = 10000.0

    def __post_init__(self):
        if self.width <= 0 or self.width % 2:
            raise ConfigError(f"embedding width must be a positive even integer, got {self.width}")

    def __call__(self, t) -> np.ndarray:
        half = self.width // 2
        freqs = self.base ** (-np.arange(half) / half)
        args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs
        return np.concatenate([np.sin(args), np.cos(args)], axis=1)


@dataclass(frozen=True)
class NoisePredictor:
    data_dim: int
    cond_dim: int
    hidden: tuple[int, ...]
    embedding: TimeEmbedding
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = ACTIVATION

    @property
    def input_width(self) -> int:
        return self.data_dim + self.embedding.width + self.cond_dim

    @property
    def output_width(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_params(self, params) -> "NoisePredictor":
        params = list(params)
        if len(params) != 2 * len(self.weights):
            raise ShapeError(f"expected {2 * len(self.weights)} arrays, got {len(params)}")
        for new, old in zip(params, self.params()):
            if np.shape(new) != old.shape:
                raise ShapeError(f"parameter shape {np.shape(new)} != {old.shape}")
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))

    def n_params(self) -> int:
        return sum(p.size for p in self.params())


def init(seed: int, data_dim: int, cond_dim: int = 0, hidden=(128, 128, 128, 128),
         embed_width: int = 16, embed_base: float = 10000.0) -> NoisePredictor:
    """Fan-in scaled uniform weights ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``, zero biases."""
    hidden = tuple(int(h) for h in hidden)
    if data_dim <= 0 or cond_dim < 0 or not hidden or any(h <= 0 for h in hidden):
        raise ConfigError("dimensions and hidden widths must be positive")
    embedding = TimeEmbedding(int(embed_width), float(embed_base))
    widths = (data_dim + embedding.width + cond_dim, *hidden, data_dim)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NoisePredictor(data_dim, cond_dim, hidden, embedding, tuple(weights), tuple(biases))


def _inputs(model: NoisePredictor, x_t, t, c) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim != 2 or x_t.shape[1] != model.data_dim:
        raise ShapeError(f"x_t must have shape (batch, {model.data_dim}), got {x_t.shape}")
    t = np.broadcast_to(np.asarray(t), (x_t.shape[0],))
    parts = [x_t, model.embedding(t)]
    if model.cond_dim:
        if c is None:
            raise ShapeError(f"model expects a {model.cond_dim}-column condition")
        c = np.asarray(c, dtype=np.float64)
        if c.ndim == 1:
            c = np.broadcast_to(c, (x_t.shape[0], c.shape[0]))
        if c.shape != (x_t.shape[0], model.cond_dim):
            raise ShapeError(f"condition must have shape ({x_t.shape[0]}, {model.cond_dim}), got {c.shape}")
        parts.append(c)
    elif c is not None and np.size(c):
        raise ShapeError("unconditional model received a condition")
    return np.concatenate(parts, axis=1)


def forward(model: NoisePredictor, x_t, t, c=None) -> np.ndarray:
    """Predicted noise for ``x_t`` at 1-based step(s) ``t``.

    Accepts a single vector or a ``(batch, data_dim)`` matrix; the output has
    the same layout.
    """
    single = np.ndim(x_t) == 1
    if single:
        x_t = np.asarray(x_t)[None, :]
        if c is not None:
            c = np.asarray(c)[None, :]
    h = _inputs(model, x_t, t, c)
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            np.tanh(h, out=h)
    return h[0] if single else h


def noise_loss_and_grads(model: NoisePredictor, x0, t, eps, schedule: DiffusionSchedule, c=None):
    """Loss and gradients for explicitly supplied steps ``t`` and noises ``eps``."""
    x0 = np.asarray(x0, dtype=np.float64)
    _, _, alpha_bar, _ = schedule.at(t)
    ab = np.asarray(alpha_bar).reshape(-1, 1)
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps

    acts = [_inputs(model, x_t, t, c)]
    last = len(model.weights) - 1
    h = acts[0]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        acts.append(h)
    resid = acts[-1] - eps
    loss = float(np.mean(resid ** 2))
    if not np.isfinite(loss):
        raise NonFiniteError(f"non-finite loss {loss!r}")

    grad_w, grad_b = [None] * len(model.weights), [None] * len(model.weights)
    delta = 2.0 * resid / resid.size
    for i in range(last, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (1.0 - acts[i] ** 2)
    grads = []
    for gw, gb in zip(grad_w, grad_b):
        grads += [gw, gb]
    return loss, grads


def loss_and_grads(model: NoisePredictor, x0, schedule: DiffusionSchedule,
                   rng: np.random.Generator, c=None):
    """Simplified denoising loss on a batch of standardized ``x0``.

    Each row draws ``t ~ U{1..T}`` and ``eps ~ N(0, I)``, in that order, from ``rng``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    t = rng.integers(1, schedule.T + 1, size=x0.shape[0])
    eps = rng.standard_normal(x0.shape)
    return noise_loss_and_grads(model, x0, t, eps, schedule, c)


# ---------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class AdamState:
    lr: float
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, model: NoisePredictor, lr: float, **kw) -> "AdamState":
        zeros = tuple(np.zeros_like(p) for p in model.params())
        return cls(float(lr), zeros, tuple(z.copy() for z in zeros), **kw)


def adam_step(model: NoisePredictor, state: AdamState, grads):
    """One bias-corrected Adam update. Returns ``(model, state)``; inputs are untouched."""
    params = model.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ShapeError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteError("non-finite gradient")
    k = state.step + 1
    c1 = 1.0 - state.beta1 ** k
    c2 = 1.0 - state.beta2 ** k
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    if not all(np.all(np.isfinite(p)) for p in new_p):
        raise NonFiniteError("parameters became non-finite")
    return model.with_params(new_p), replace(state, m=tuple(new_m), v=tuple(new_v), step=k)


# ---------------------------------------------------------------------------
# exponential moving average


@dataclass(frozen=True)
class EmaShadow:
    mu: float = 0.9
    params: tuple[np.ndarray, ...] | None = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError(f"EMA constant must lie in [0, 1], got {self.mu!r}")

    @classmethod
    def from_model(cls, model: NoisePredictor, mu: float = 0.9) -> "EmaShadow":
        return cls(mu, tuple(p.copy() for p in model.params()))


def ema_update(shadow: EmaShadow, model: NoisePredictor) -> EmaShadow:
    """``shadow <- (1 - mu) * current + mu * shadow``; an empty shadow copies ``model``."""
    current = model.params()
    if shadow.params is None:
        return replace(shadow, params=tuple(p.copy() for p in current))
    if len(shadow.params) != len(current) or any(
            s.shape != p.shape for s, p in zip(shadow.params, current)):
        raise ShapeError("EMA shadow does not match model parameters")
    mu = shadow.mu
    return replace(shadow, params=tuple((1.0 - mu) * p + mu * s
                                        for p, s in zip(current, shadow.params)))


def ema_weights(shadow: EmaShadow, model: NoisePredictor) -> NoisePredictor:
    if shadow.params is None:
        raise ConfigError("EMA shadow is uninitialized")
    return model.with_params(shadow.params)
