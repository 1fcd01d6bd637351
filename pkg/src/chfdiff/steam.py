"""Water/steam saturation properties from the IAPWS-IF97 industrial formulation.

Only what the energy balance needs is implemented: the region-4 saturation
line and the enthalpy of the region-1 (liquid) and region-2 (vapour) Gibbs
equations.  Pressures are in MPa, temperatures in K, enthalpies in kJ/kg.

Above 623.15 K the saturated states formally belong to region 3; there the
saturated enthalpies are obtained by evaluating the region-1/2 equations on
the saturation line (``h_sat_liquid``/``h_sat_vapor``).  That extrapolation is
smooth and monotone up to ~21.9 MPa but loses accuracy approaching the
critical point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

R = 0.461526  # kJ/(kg K)
T_CRIT = 647.096  # K
P_CRIT = 22.064  # MPa
T_TRIPLE = 273.15  # K
P_MIN = 611.212677e-6  # MPa, psat(273.15 K)
T_13 = 623.15  # K, region 1/3 boundary

# Region 4, saturation line
_N4 = np.array([0.11670521452767e4, -0.72421316703206e6, -0.17073846940092e2,
                0.12020824702470e5, -0.32325550322333e7, 0.14915108613530e2,
                -0.48232657361591e4, 0.40511340542057e6, -0.23855557567849,
                0.65017534844798e3])

# Boundary between regions 2 and 3
_NB23 = np.array([0.34805185628969e3, -0.11671859879975e1, 0.10192970039326e-2])

# Region 1
_I1 = np.array([0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 4, 4, 4, 5,
                8, 8, 21, 23, 29, 30, 31, 32])
_J1 = np.array([-2, -1, 0, 1, 2, 3, 4, 5, -9, -7, -1, 0, 1, 3, -3, 0, 1, 3, 17, -4, 0, 6, -5,
                -2, 10, -8, -11, -6, -29, -31, -38, -39, -40, -41])
_N1 = np.array([
    0.14632971213167, -0.84548187169114, -0.37563603672040e1, 0.33855169168385e1,
    -0.95791963387872, 0.15772038513228, -0.16616417199501e-1, 0.81214629983568e-3,
    0.28319080123804e-3, -0.60706301565874e-3, -0.18990068218419e-1, -0.32529748770505e-1,
    -0.21841717175414e-1, -0.52838357969930e-4, -0.47184321073267e-3, -0.30001780793026e-3,
    0.47661393906987e-4, -0.44141845330846e-5, -0.72694996297594e-15, -0.31679644845054e-4,
    -0.28270797985312e-5, -0.85205128120103e-9, -0.22425281908000e-5, -0.65171222895601e-6,
    -0.14341729937924e-12, -0.40516996860117e-6, -0.12734301741682e-8, -0.17424871230634e-9,
    -0.68762131295531e-18, 0.14478307828521e-19, 0.26335781662795e-22, -0.11947622640071e-22,
    0.18228094581404e-23, -0.93537087292458e-25])

# Region 2, ideal-gas part
_J02 = np.array([0, 1, -5, -4, -3, -2, -1, 2, 3])
_N02 = np.array([-0.96927686500217e1, 0.10086655968018e2, -0.56087911283020e-2,
                 0.71452738081455e-1, -0.40710498223928, 0.14240819171444e1,
                 -0.43839511319450e1, -0.28408632460772, 0.21268463753307e-1])

# Region 2, residual part
_I2 = np.array([1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 5, 6, 6, 6, 7, 7, 7, 8, 8,
                9, 10, 10, 10, 16, 16, 18, 20, 20, 20, 21, 22, 23, 24, 24, 24])
_J2 = np.array([0, 1, 2, 3, 6, 1, 2, 4, 7, 36, 0, 1, 3, 6, 35, 1, 2, 3, 7, 3, 16, 35, 0, 11, 25,
                8, 36, 13, 4, 10, 14, 29, 50, 57, 20, 35, 48, 21, 53, 39, 26, 40, 58])
_N2 = np.array([
    -0.17731742473213e-2, -0.17834862292358e-1, -0.45996013696365e-1, -0.57581259083432e-1,
    -0.50325278727930e-1, -0.33032641670203e-4, -0.18948987516315e-3, -0.39392777243355e-2,
    -0.43797295650573e-1, -0.26674547914087e-4, 0.20481737692309e-7, 0.43870667284435e-6,
    -0.32277677238570e-4, -0.15033924542148e-2, -0.40668253562649e-1, -0.78847309559367e-9,
    0.12790717852285e-7, 0.48225372718507e-6, 0.22922076337661e-5, -0.16714766451061e-10,
    -0.21171472321355e-2, -0.23895741934104e2, -0.59059564324270e-17, -0.12621808899101e-5,
    -0.38946842435739e-1, 0.11256211360459e-10, -0.82311340897998e1, 0.19809712802088e-7,
    0.10406965210174e-18, -0.10234747095929e-12, -0.10018179379511e-8, -0.80882908646985e-10,
    0.10693031879409, -0.33662250574171, 0.89185845355421e-24, 0.30629316876232e-12,
    -0.42002467698208e-5, -0.59056029685639e-25, 0.37826947613457e-5, -0.12768608934681e-14,
    0.73087610595061e-28, 0.55414715350778e-16, -0.94369707241210e-6])


def _arr(x):
    a = np.asarray(x, dtype=np.float64)
    return a, a.ndim == 0


def _out(a, scalar):
    return float(a) if scalar else a


def _check(name, values, lo, hi, hi_open=True):
    bad_lo = values < lo
    bad_hi = values >= hi if hi_open else values > hi
    if np.any(bad_lo | bad_hi | ~np.isfinite(values)):
        bound = f"[{lo!r}, {hi!r}{')' if hi_open else ']'}"
        raise DomainError(f"{name} outside {bound}: {values[bad_lo | bad_hi].ravel()[:3]}")


# ---------------------------------------------------------------------------
# region 4


def psat(T):
    """Saturation pressure [MPa] at temperature ``T`` [K], 273.15 <= T < 647.096."""
    T, scalar = _arr(T)
    # slack so that psat(tsat(P_MIN)) round-trips (tsat(P_MIN) = 273.15 - 1e-8)
    _check("temperature [K]", T, T_TRIPLE * (1 - 1e-9), T_CRIT)
    n = _N4
    theta = T + n[8] / (T - n[9])
    A = theta ** 2 + n[0] * theta + n[1]
    B = n[2] * theta ** 2 + n[3] * theta + n[4]
    C = n[5] * theta ** 2 + n[6] * theta + n[7]
    return _out((2 * C / (-B + np.sqrt(B ** 2 - 4 * A * C))) ** 4, scalar)


def tsat(P):
    """Saturation temperature [K] at pressure ``P`` [MPa], 611.212677 Pa <= P < 22.064 MPa."""
    P, scalar = _arr(P)
    _check("pressure [MPa]", P, P_MIN, P_CRIT)
    n = _N4
    beta = P ** 0.25
    E = beta ** 2 + n[2] * beta + n[5]
    F = n[0] * beta ** 2 + n[3] * beta + n[6]
    G = n[1] * beta ** 2 + n[4] * beta + n[7]
    D = 2 * G / (-F - np.sqrt(F ** 2 - 4 * E * G))
    return _out((n[9] + D - np.sqrt((n[9] + D) ** 2 - 4 * (n[8] + n[9] * D))) / 2, scalar)


def p_b23(T):
    """Pressure [MPa] on the region 2/3 boundary."""
    n = _NB23
    return n[0] + n[1] * T + n[2] * T ** 2


# ---------------------------------------------------------------------------
# regions 1 and 2


def _h1(T, P):
    tau = 1386.0 / T[..., None]
    pi = P[..., None] / 16.53
    g_tau = np.sum(_N1 * (7.1 - pi) ** _I1 * _J1 * (tau - 1.222) ** (_J1 - 1), axis=-1)
    return R * T * tau[..., 0] * g_tau


def _h2(T, P):
    tau = 1386.0 / T[..., None] * (540.0 / 1386.0)
    pi = P[..., None]
    g0_tau = np.sum(_N02 * _J02 * tau ** (_J02 - 1), axis=-1)
    gr_tau = np.sum(_N2 * pi ** _I2 * _J2 * (tau - 0.5) ** (_J2 - 1), axis=-1)
    return R * T * tau[..., 0] * (g0_tau + gr_tau)


_SAT_RTOL = 1e-9


def h_region1(T, P):
    """Specific enthalpy [kJ/kg] of compressed liquid (region 1)."""
    (T, st), (P, sp) = _arr(T), _arr(P)
    T, P = np.broadcast_arrays(T, P)
    _check("region-1 temperature [K]", T, T_TRIPLE, T_13, hi_open=False)
    _check("region-1 pressure [MPa]", P, 0.0, 100.0, hi_open=False)
    if np.any(P < psat(T) * (1 - _SAT_RTOL)):
        raise DomainError("region 1 requires P >= psat(T)")
    return _out(_h1(T, P), st and sp)


def h_region2(T, P):
    """Specific enthalpy [kJ/kg] of superheated vapour (region 2)."""
    (T, st), (P, sp) = _arr(T), _arr(P)
    T, P = np.broadcast_arrays(T, P)
    _check("region-2 temperature [K]", T, T_TRIPLE, 1073.15, hi_open=False)
    if np.any(P <= 0):
        raise DomainError("region 2 requires P > 0")
    low = T <= T_13
    limit = np.where(low, psat(np.minimum(T, T_13)) * (1 + _SAT_RTOL),
                     np.where(T <= 863.15, p_b23(T), 100.0))
    if np.any(P > limit):
        raise DomainError("pressure above the region-2 upper boundary")
    return _out(_h2(T, P), st and sp)


# ---------------------------------------------------------------------------
# saturation line


@dataclass(frozen=True)
class SaturationPoint:
    P: float
    T_sat: float
    h_f: float
    h_g: float

    @property
    def h_fg(self) -> float:
        return self.h_g - self.h_f


def h_sat_liquid(P):
    """Saturated-liquid enthalpy [kJ/kg] at ``P`` [MPa]."""
    (P, scalar) = _arr(P)
    return _out(_h1(np.asarray(tsat(P)), P), scalar)


def h_sat_vapor(P):
    """Saturated-vapour enthalpy [kJ/kg] at ``P`` [MPa]."""
    (P, scalar) = _arr(P)
    return _out(_h2(np.asarray(tsat(P)), P), scalar)


def h_fg(P):
    return h_sat_vapor(P) - h_sat_liquid(P)


def saturation_point(P: float) -> SaturationPoint:
    return SaturationPoint(float(P), tsat(P), h_sat_liquid(P), h_sat_vapor(P))
