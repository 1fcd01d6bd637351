"""Training loops, ancestral sampling, trajectories and Monte-Carlo ensembles.

Every reverse chain owns one seeded noise stream: ``default_rng(seed)`` draws
a ``(T, dim)`` block whose first row is ``x_T`` and whose row ``j >= 1`` is
the noise injected at step ``t = T - j + 1``.  Rows of a batch therefore
never share randomness and results do not depend on batching or threading.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dataset as ds
from . import noisenet
from .errors import CheckpointError, ConfigError, NonFiniteError, ShapeError
from .schedule import DiffusionSchedule, make_schedule

log = logging.getLogger(__name__)

MODES = ("dm", "cdm")
CHAIN_CHUNK = 4096


@dataclass
class TrainConfig:
    mode: str = "cdm"
    feature_mode: str = "x"
    epochs: int = 7500
    batch_size: int = 300
    lr: float = 1e-4
    T: int = 200
    beta_min: float = 1e-5
    beta_max: float = 1e-2
    slope: float = 6.0
    schedule: str = "sigmoid"
    ema_mu: float = 0.9
    seed: int = 0
    hidden: tuple[int, ...] = (128,) * 6
    embed_width: int = 16
    embed_base: float = 10000.0

    @classmethod
    def published(cls, mode: str, **overrides) -> "TrainConfig":
        """Published recipes: DM (T=100, 1200 epochs, batch 64, lr 1e-3) and
        CDM (T=200, 7500 epochs, batch 300, lr 1e-4, six hidden layers)."""
        if mode == "dm":
            base = dict(mode="dm", epochs=1200, batch_size=64, lr=1e-3, T=100, hidden=(128,) * 4)
        elif mode == "cdm":
            base = dict(mode="cdm")
        else:
            raise ConfigError(f"unknown model mode {mode!r}; expected one of {MODES}")
        base.update(overrides)
        return cls(**base)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.mode not in MODES:
            raise ConfigError(f"unknown model mode {self.mode!r}; expected one of {MODES}")
        ds.condition_columns(self.feature_mode)
        for name in ("epochs", "batch_size", "T", "embed_width"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr!r}")
        if not 0 <= self.ema_mu <= 1:
            raise ConfigError(f"ema_mu must lie in [0, 1], got {self.ema_mu!r}")

    @property
    def data_columns(self) -> tuple[str, ...]:
        conds = ds.condition_columns(self.feature_mode)
        return (*conds, "chf") if self.mode == "dm" else ("chf",)

    @property
    def cond_columns(self) -> tuple[str, ...]:
        return () if self.mode == "dm" else ds.condition_columns(self.feature_mode)

    def make_schedule(self) -> DiffusionSchedule:
        return make_schedule(self.schedule, self.T, self.beta_min, self.beta_max, self.slope)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Checkpoint:
    config: TrainConfig
    schedule: DiffusionSchedule
    model: noisenet.NoisePredictor
    ema: noisenet.EmaShadow
    scaler: ds.StandardScaler
    manifest: str = ""

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def data_columns(self) -> tuple[str, ...]:
        return self.config.data_columns

    @property
    def cond_columns(self) -> tuple[str, ...]:
        return self.config.cond_columns

    def sampling_model(self, use_ema: bool = True) -> noisenet.NoisePredictor:
        return noisenet.ema_weights(self.ema, self.model) if use_ema else self.model


@dataclass
class SampleEnsemble:
    condition: np.ndarray
    mu_samples: float
    sigma_samples: float
    relative_std: float | None
    n: int
    draws: np.ndarray | None = None


@dataclass
class Trajectory:
    stride: int
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def steps(self) -> list[int]:
        return [t for t, _ in self.snapshots]


def forward_noise(x0, t: int, eps, schedule: DiffusionSchedule) -> np.ndarray:
    """Closed-form ``q(x_t | x_0)`` draw: ``sqrt(abar_t) x0 + sqrt(1 - abar_t) eps``."""
    if not 1 <= t <= schedule.T:
        raise ConfigError(f"time-step {t} outside [1, {schedule.T}]")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 shape {x0.shape} != noise shape {eps.shape}")
    ab = schedule.alpha_bar[t - 1]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


# ---------------------------------------------------------------------------
# training


def _training_arrays(records, config: TrainConfig, scaler: ds.StandardScaler):
    data = ds.records_to_matrix(records, config.data_columns)
    x0 = scaler.subset(config.data_columns).transform(data)
    cond = None
    if config.cond_columns:
        raw = ds.records_to_matrix(records, config.cond_columns)
        cond = scaler.subset(config.cond_columns).transform(raw)
    return x0, cond


def train(records: Sequence[ds.ChfRecord], config: TrainConfig,
          progress: Callable[[int, float], None] | None = None):
    """Fit a noise predictor on (training-split) ``records``.

    The scaler is fitted on ``records``.  Returns ``(checkpoint, losses)``
    where ``losses[e]`` is the mean mini-batch loss of epoch ``e + 1``.
    """
    if len(records) == 0:
        raise ConfigError("no training records")
    columns = (*config.cond_columns, *config.data_columns)
    scaler = ds.fit_scaler(records, columns)
    x0, cond = _training_arrays(records, config, scaler)
    schedule = config.make_schedule()

    model = noisenet.init(config.seed, len(config.data_columns), len(config.cond_columns),
                          config.hidden, config.embed_width, config.embed_base)
    adam = noisenet.AdamState.create(model, config.lr)
    ema = noisenet.EmaShadow.from_model(model, config.ema_mu)
    rng = np.random.default_rng([config.seed, 1])

    n = x0.shape[0]
    losses = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total, batches = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads = noisenet.loss_and_grads(
                    model, x0[idx], schedule, rng, None if cond is None else cond[idx])
                model, adam = noisenet.adam_step(model, adam, grads)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}, batch {b}: {exc}") from None
            ema = noisenet.ema_update(ema, model)
            total += loss
            batches += 1
        losses.append(total / batches)
        if progress is not None:
            progress(epoch, losses[-1])
        log.debug("epoch %d loss %.6f", epoch, losses[-1])
    return Checkpoint(config, schedule, model, ema, scaler), np.array(losses)


# ---------------------------------------------------------------------------
# sampling


def chain_noise(seeds, T: int, dim: int) -> np.ndarray:
    """Stacked per-chain noise blocks, shape ``(len(seeds), T, dim)``."""
    out = np.empty((len(seeds), T, dim))
    for i, s in enumerate(seeds):
        out[i] = np.random.default_rng(int(s)).standard_normal((T, dim))
    return out


def reverse_chain(model: noisenet.NoisePredictor, schedule: DiffusionSchedule, noise,
                  cond=None, snapshot_steps=()):
    """Run ancestral sampling on standardized values.

    ``x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z``
    with ``z = 0`` at ``t = 1``.  Returns ``(x_0, {t: x_t})`` for the
    requested ``snapshot_steps`` (``T`` is the starting noise, 0 the result).
    """
    T = schedule.T
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 3 or noise.shape[1] != T or noise.shape[2] != model.data_dim:
        raise ShapeError(f"noise must have shape (n, {T}, {model.data_dim}), got {noise.shape}")
    wanted = set(snapshot_steps)
    snaps = {}
    x = noise[:, 0, :].copy()
    if T in wanted:
        snaps[T] = x.copy()
    for t in range(T, 0, -1):
        beta, alpha, alpha_bar, sigma = schedule.at(t)
        eps_hat = noisenet.forward(model, x, t, cond)
        x = (x - (beta / np.sqrt(1.0 - alpha_bar)) * eps_hat) / np.sqrt(alpha)
        if t > 1:
            x = x + sigma * noise[:, T - t + 1, :]
        if t - 1 in wanted:
            snaps[t - 1] = x.copy()
    return x, snaps


def _standardized_conditions(ckpt: Checkpoint, conditions) -> np.ndarray:
    conditions = np.asarray(conditions, dtype=np.float64)
    if conditions.ndim == 1:
        conditions = conditions[None, :]
    k = len(ckpt.cond_columns)
    if conditions.ndim != 2 or conditions.shape[1] != k:
        raise CheckpointError(
            f"checkpoint expects condition columns {ckpt.cond_columns}, got shape {conditions.shape}")
    return ckpt.scaler.subset(ckpt.cond_columns).transform(conditions)


def _run(ckpt: Checkpoint, seeds, cond_std=None, use_ema=True, snapshot_steps=(), workers=1):
    """Standardized chain results for ``seeds`` (and matching condition rows)."""
    model = ckpt.sampling_model(use_ema)
    T, dim = ckpt.schedule.T, model.data_dim
    seeds = np.asarray(seeds, dtype=np.int64)

    def work(lo):
        hi = min(lo + CHAIN_CHUNK, len(seeds))
        c = None if cond_std is None else cond_std[lo:hi]
        return reverse_chain(model, ckpt.schedule, chain_noise(seeds[lo:hi], T, dim), c,
                             snapshot_steps)

    starts = range(0, len(seeds), CHAIN_CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(lo) for lo in starts]
    if not parts:
        return np.empty((0, dim)), {t: np.empty((0, dim)) for t in snapshot_steps}
    x0 = np.concatenate([p[0] for p in parts])
    snaps = {t: np.concatenate([p[1][t] for p in parts]) for t in snapshot_steps}
    return x0, snaps


def sample_dm(ckpt: Checkpoint, n: int, seed: int = 0, use_ema: bool = True):
    """``n`` unconditional samples in physical units, columns ``ckpt.data_columns``.

    Row ``i`` uses chain seed ``seed + i``.
    """
    if ckpt.mode != "dm":
        raise CheckpointError("sample_dm requires an unconditional (dm) checkpoint")
    if n < 0:
        raise ConfigError(f"sample count must be >= 0, got {n}")
    x0, _ = _run(ckpt, seed + np.arange(n), use_ema=use_ema)
    return ckpt.scaler.subset(ckpt.data_columns).inverse_transform(x0)


def sample_cdm(ckpt: Checkpoint, conditions, seed: int = 0, use_ema: bool = True,
               seeds=None, workers: int = 1) -> np.ndarray:
    """One CHF draw per condition row (physical units); row ``i`` uses seed ``seed + i``."""
    if ckpt.mode != "cdm":
        raise CheckpointError("sample_cdm requires a conditional (cdm) checkpoint")
    cond = _standardized_conditions(ckpt, conditions)
    if seeds is None:
        seeds = seed + np.arange(cond.shape[0])
    x0, _ = _run(ckpt, seeds, cond, use_ema=use_ema, workers=workers)
    return ckpt.scaler.subset(("chf",)).inverse_transform(x0)[:, 0]


def summarize_draws(condition, draws, retain: bool = True) -> SampleEnsemble:
    """Ensemble statistics with the population standard deviation."""
    draws = np.asarray(draws, dtype=np.float64)
    if draws.size < 1:
        raise ConfigError("an ensemble needs at least one draw")
    mu = float(draws.mean())
    sigma = float(draws.std())
    rel = 100.0 * sigma / mu if mu != 0 else None
    return SampleEnsemble(np.asarray(condition, dtype=np.float64), mu, sigma, rel, draws.size,
                          draws.copy() if retain else None)


def uq_ensemble(ckpt: Checkpoint, conditions, n: int = 500, seed: int = 0, *,
                retain_draws: bool = True, use_ema: bool = True, workers: int = 1,
                sampler: Callable | None = None) -> list[SampleEnsemble]:
    """``n`` independent chains per condition row; draw ``k`` of row ``r`` uses
    seed ``seed + r * n + k``.

    ``sampler(conditions, seeds) -> chf`` replaces the diffusion sampler (test doubles).
    """
    if n < 2:
        raise ConfigError(f"ensembles need n >= 2, got {n}")
    conditions = np.atleast_2d(np.asarray(conditions, dtype=np.float64))
    rows = conditions.shape[0]
    seeds = seed + np.arange(rows * n, dtype=np.int64)
    repeated = np.repeat(conditions, n, axis=0)
    if sampler is None:
        draws = sample_cdm(ckpt, repeated, seeds=seeds, use_ema=use_ema, workers=workers)
    else:
        draws = np.asarray(sampler(repeated, seeds), dtype=np.float64)
    draws = draws.reshape(rows, n)
    return [summarize_draws(conditions[r], draws[r], retain_draws) for r in range(rows)]


def trajectory_steps(T: int, stride: int) -> list[int]:
    if stride <= 0:
        raise ConfigError(f"stride must be positive, got {stride}")
    steps = list(range(T, 0, -stride))
    return steps + [0]


def trajectory(ckpt: Checkpoint, conditions=None, stride: int = 40, seed: int = 0,
               n: int | None = None, use_ema: bool = True) -> Trajectory:
    """Partially denoised states in physical units at ``t = T, T - stride, ..., 0``.

    Uses the same per-row seeds as :func:`sample_cdm` / :func:`sample_dm`, so
    the final snapshot equals their output.
    """
    steps = trajectory_steps(ckpt.schedule.T, stride)
    data_scaler = ckpt.scaler.subset(ckpt.data_columns)
    if ckpt.mode == "cdm":
        if conditions is None:
            raise ConfigError("a cdm trajectory needs conditions")
        cond = _standardized_conditions(ckpt, conditions)
        seeds = seed + np.arange(cond.shape[0])
    else:
        if n is None:
            raise ConfigError("a dm trajectory needs a sample count n")
        cond, seeds = None, seed + np.arange(n)
    _, snaps = _run(ckpt, seeds, cond, use_ema=use_ema, snapshot_steps=steps)
    out = Trajectory(stride)
    for t in steps:
        values = data_scaler.inverse_transform(snaps[t])
        out.snapshots.append((t, values[:, 0] if ckpt.mode == "cdm" else values))
    return out
