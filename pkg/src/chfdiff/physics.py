"""Energy-balance outlet quality and the measured/calculated/generated comparison.

Units: P [kPa], G [kg/m^2/s], D [m], L [m], h_sub [kJ/kg], q_chf [kW/m^2].
``4 q L / (G D)`` is then directly in kJ/kg.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import steam
from .errors import DomainError

KPA_PER_MPA = 1000.0
_GD_MIN = 1e-12


def enthalpy_rise(q_chf, L, G, D):
    """Coolant enthalpy rise [kJ/kg] over a uniformly heated tube."""
    q_chf, L, G, D = (np.asarray(a, dtype=np.float64) for a in (q_chf, L, G, D))
    gd = G * D
    if np.any(np.abs(gd) < _GD_MIN):
        raise DomainError("G*D below 1e-12; cannot form the enthalpy rise")
    return 4.0 * q_chf * L / gd


def outlet_quality(P, G, D, L, h_sub, q_chf):
    """Outlet equilibrium quality from an inlet-to-outlet energy balance.

    ``h_in = h_f - h_sub`` and ``h_out = h_in + 4 q L / (G D)``, so
    ``x = (h_out - h_f) / h_fg``.  Saturation enthalpies come from IF97 at
    ``P / 1000`` MPa.  Scalars or broadcastable arrays.
    """
    P_mpa = np.asarray(P, dtype=np.float64) / KPA_PER_MPA
    h_f = steam.h_sat_liquid(P_mpa)
    h_fg = steam.h_sat_vapor(P_mpa) - h_f
    h_in = h_f - np.asarray(h_sub, dtype=np.float64)
    h_out = h_in + enthalpy_rise(q_chf, L, G, D)
    x = (h_out - h_f) / h_fg
    return float(x) if np.ndim(x) == 0 else x


def in_steam_domain(P_kpa) -> np.ndarray:
    P_mpa = np.asarray(P_kpa, dtype=np.float64) / KPA_PER_MPA
    return (P_mpa >= steam.P_MIN) & (P_mpa < steam.P_CRIT)


@dataclass(frozen=True)
class QualityTriple:
    x_measured: float
    x_calculated: float
    x_generated: float


def quality_triples(P, G, D, L, h_sub, x_measured, chf_measured, chf_generated):
    """Build triples row by row; rows outside the steam domain are dropped.

    Returns ``(triples, kept_index, n_excluded)``.
    """
    P = np.asarray(P, dtype=np.float64)
    keep = np.flatnonzero(in_steam_domain(P))
    args = [np.asarray(a, dtype=np.float64)[keep] for a in (G, D, L, h_sub)]
    x_calc = np.atleast_1d(outlet_quality(P[keep], *args, np.asarray(chf_measured)[keep]))
    x_gen = np.atleast_1d(outlet_quality(P[keep], *args, np.asarray(chf_generated)[keep]))
    x_meas = np.asarray(x_measured, dtype=np.float64)[keep]
    triples = [QualityTriple(float(a), float(b), float(c)) for a, b, c in zip(x_meas, x_calc, x_gen)]
    return triples, keep, len(P) - len(keep)


SUMMARY_KEYS = ("mean", "std", "min", "25%", "50%", "75%", "max")


def describe(values) -> dict[str, float]:
    """Mean, sample std (ddof=1), min, linear-interpolated quartiles and max."""
    v = np.asarray(values, dtype=np.float64)
    q25, q50, q75 = np.percentile(v, [25, 50, 75], method="linear")
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()), "25%": float(q25), "50%": float(q50), "75%": float(q75),
            "max": float(v.max())}


def consistency_report(triples: Sequence[QualityTriple]) -> dict[str, dict[str, float]]:
    """Absolute-error summaries for ``measured - generated`` and ``calculated - generated``."""
    if not triples:
        raise ValueError("consistency report needs at least one triple")
    meas = np.array([t.x_measured for t in triples])
    calc = np.array([t.x_calculated for t in triples])
    gen = np.array([t.x_generated for t in triples])
    return {"measured-generated": describe(np.abs(meas - gen)),
            "calculated-generated": describe(np.abs(calc - gen)),
            "measured-calculated": describe(np.abs(meas - calc))}
