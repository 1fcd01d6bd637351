"""Seeded synthetic CHF-like tables with known generating laws.

Used for desk-scale checks where the underlying truth must be known exactly.
"""

from __future__ import annotations

import numpy as np

from .dataset import ChfRecord
from .physics import outlet_quality

# mixture in standardized coordinates, then mapped to plausible physical ranges
MIX_WEIGHTS = np.array([0.6, 0.4])
MIX_MEANS = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                      [1.5, -1.0, 1.0, 0.5, -1.2, 1.5]])
MIX_CORR = np.array([
    [1.0, 0.5, 0.2, 0.0, -0.3, -0.4],
    [0.5, 1.0, 0.1, 0.2, -0.2, 0.0],
    [0.2, 0.1, 1.0, 0.4, 0.0, -0.2],
    [0.0, 0.2, 0.4, 1.0, 0.3, -0.3],
    [-0.3, -0.2, 0.0, 0.3, 1.0, -0.5],
    [-0.4, 0.0, -0.2, -0.3, -0.5, 1.0],
])
MIX_CENTER = np.array([10000.0, 3000.0, 0.012, 2.0, 0.2, 3000.0])  # P G D L x_out chf
MIX_SCALE = np.array([1500.0, 500.0, 0.001, 0.25, 0.08, 400.0])
MIX_COLUMNS = ("P", "G", "D", "L", "x_out", "chf")


def gaussian_mixture(n: int, seed: int) -> np.ndarray:
    """``(n, 6)`` draws of the two-component correlated mixture, physical units."""
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(MIX_WEIGHTS), size=n, p=MIX_WEIGHTS)
    chol = np.linalg.cholesky(MIX_CORR)
    z = rng.standard_normal((n, 6)) @ chol.T + MIX_MEANS[comp]
    return MIX_CENTER + MIX_SCALE * z


def matrix_to_records(matrix, columns=MIX_COLUMNS) -> list[ChfRecord]:
    return [ChfRecord(**{c: float(v) for c, v in zip(columns, row)}) for row in matrix]


def mixture_records(n: int, seed: int) -> list[ChfRecord]:
    return matrix_to_records(gaussian_mixture(n, seed))


def chf_law_x(P, G, D, L, x_out):
    """Smooth positive CHF [kW/m^2] in (P, G, D, L, x_out)."""
    return (2500.0 * (G / 2500.0) ** 0.5 * (P / 10000.0) ** -0.2 * (D / 0.012) ** -0.3
            * (L / 2.0) ** -0.15 * (1.0 - 0.9 * x_out))


def chf_law_hsub(P, G, D, L, h_sub):
    """Smooth positive CHF [kW/m^2] in (P, G, D, L, h_sub)."""
    return (2000.0 * (G / 2500.0) ** 0.4 * (P / 10000.0) ** -0.25 * (D / 0.012) ** -0.3
            * (L / 1.5) ** -0.3 * (1.0 + h_sub / 800.0))


def chf_records(n: int, seed: int, mode: str = "x", noise: float = 0.02,
                x_noise: float = 0.003) -> list[ChfRecord]:
    """Uniform conditions and CHF from the law for ``mode`` times ``1 + noise * N(0, 1)``.

    In ``"hsub"`` mode ``x_out`` is the energy-balance quality of the noisy CHF
    plus ``x_noise * N(0, 1)``, standing in for tabulation discrepancies.
    """
    rng = np.random.default_rng(seed)
    P = rng.uniform(5000.0, 12000.0, n)
    G = rng.uniform(1500.0, 4000.0, n)
    D = rng.uniform(0.008, 0.016, n)
    L = rng.uniform(1.0, 2.0, n)
    eta = rng.standard_normal(n)
    if mode == "x":
        x = rng.uniform(-0.1, 0.5, n)
        chf = chf_law_x(P, G, D, L, x) * (1.0 + noise * eta)
        h_sub = np.full(n, None)
    elif mode == "hsub":
        h_sub = rng.uniform(20.0, 400.0, n)
        chf = chf_law_hsub(P, G, D, L, h_sub) * (1.0 + noise * eta)
        x = outlet_quality(P, G, D, L, h_sub, chf) + x_noise * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return [ChfRecord(D=float(D[i]), L=float(L[i]), P=float(P[i]), G=float(G[i]),
                      chf=float(chf[i]), x_out=float(x[i]),
                      h_sub=None if h_sub[i] is None else float(h_sub[i]))
            for i in range(n)]
