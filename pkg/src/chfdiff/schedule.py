"""Variance schedule and the per-step coefficients derived from it.

Arrays are stored 0-based: ``beta[t - 1]`` is the variance of step ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SCHEDULES = ("sigmoid",)


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    # construction parameters, kept for checkpoint headers; None for raw betas
    beta_min: float | None = None
    beta_max: float | None = None
    slope: float | None = None

    @property
    def T(self) -> int:
        return len(self.beta)

    def at(self, t):
        """Return ``(beta, alpha, alpha_bar, sigma)`` at 1-based step(s) ``t``."""
        i = np.asarray(t) - 1
        return self.beta[i], self.alpha[i], self.alpha_bar[i], self.sigma[i]

    def params(self) -> dict:
        return {"schedule": "sigmoid", "T": self.T, "beta_min": self.beta_min,
                "beta_max": self.beta_max, "slope": self.slope}


def derive_coefficients(beta, **params) -> DiffusionSchedule:
    beta = np.array(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.size == 0:
        raise ConfigError("beta must be a non-empty 1-D sequence")
    if not np.all((beta > 0) & (beta < 1)):
        raise ConfigError("every beta must lie in (0, 1)")
    alpha = 1.0 - beta
    alpha_bar = np.empty_like(alpha)
    running = 1.0
    for i, a in enumerate(alpha):
        running *= a
        alpha_bar[i] = running
    return DiffusionSchedule(beta, alpha, alpha_bar, np.sqrt(beta), **params)


def sigmoid_schedule(T: int, beta_min: float = 1e-5, beta_max: float = 1e-2,
                     slope: float = 6.0) -> DiffusionSchedule:
    """Logistic curve sampled at ``T`` even points on ``[-slope, slope]``,
    mapped affinely onto ``[beta_min, beta_max]``."""
    if int(T) != T or T < 2:
        raise ConfigError(f"T must be an integer >= 2, got {T!r}")
    if not 0 < beta_min < beta_max < 1:
        raise ConfigError(f"need 0 < beta_min < beta_max < 1, got {beta_min!r}, {beta_max!r}")
    if not slope > 0:
        raise ConfigError(f"slope must be > 0, got {slope!r}")
    s = np.linspace(-slope, slope, int(T))
    beta = beta_min + (beta_max - beta_min) / (1.0 + np.exp(-s))
    return derive_coefficients(beta, beta_min=float(beta_min), beta_max=float(beta_max),
                               slope=float(slope))


def make_schedule(name: str, T: int, beta_min: float, beta_max: float, slope: float):
    if name not in SCHEDULES:
        raise ConfigError(f"unknown schedule {name!r}; only {SCHEDULES} are supported")
    return sigmoid_schedule(T, beta_min, beta_max, slope)


def to_csv(schedule: DiffusionSchedule, path, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t,beta,alpha,alpha_bar,sigma\n")
        for t in range(1, schedule.T + 1):
            b, a, ab, s = schedule.at(t)
            fh.write(",".join([str(t)] + [repr(float(v)) for v in (b, a, ab, s)]) + "\n")
