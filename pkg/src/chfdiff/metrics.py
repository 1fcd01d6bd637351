"""Real-vs-generated comparison statistics.

Undefined quantities (e.g. a correlation involving a constant column) are
reported as ``nan`` rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

KDE_GRID_POINTS = 512


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"columns differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise ShapeError("correlation needs at least two points")
    return a, b


def pcc(a, b) -> float:
    """Pearson product-moment correlation; ``nan`` if either column is constant."""
    a, b = _pair(a, b)
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if denom == 0:
        return float("nan")
    return float(np.clip(np.dot(da, db) / denom, -1.0, 1.0))


def midranks(a) -> np.ndarray:
    """1-based ranks with ties replaced by their average rank."""
    a = np.asarray(a, dtype=np.float64).ravel()
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(a.size)
    boundaries = np.flatnonzero(np.diff(sorted_a)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [a.size]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    return ranks


def srcc(a, b) -> float:
    a, b = _pair(a, b)
    return pcc(midranks(a), midranks(b))


def _matrix(data, fn) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    k = data.shape[1]
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = fn(data[:, i], data[:, j])
        if np.ptp(data[:, i]) == 0:
            out[i, i] = np.nan
    return out


def pcc_matrix(data) -> np.ndarray:
    return _matrix(data, pcc)


def srcc_matrix(data) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    ranked = np.column_stack([midranks(col) for col in data.T])
    return _matrix(ranked, pcc)


# ---------------------------------------------------------------------------
# distributions


def marginal_ecdf(column) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous ECDF sampled at the sorted unique values."""
    v = np.sort(np.asarray(column, dtype=np.float64).ravel())
    if v.size == 0:
        raise ShapeError("ECDF of an empty column")
    values, counts = np.unique(v, return_counts=True)
    return values, np.cumsum(counts) / v.size


def ecdf_at(column, z) -> np.ndarray:
    v = np.sort(np.asarray(column, dtype=np.float64).ravel())
    return np.searchsorted(v, z, side="right") / v.size


def silverman_bandwidth(column) -> float:
    """``0.9 * min(std, IQR / 1.34) * n ** (-1/5)`` with the sample std."""
    v = np.asarray(column, dtype=np.float64).ravel()
    std = v.std(ddof=1)
    q75, q25 = np.percentile(v, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) if q75 > q25 else std
    return 0.9 * spread * v.size ** -0.2


def kde_1d(column, bandwidth: float | None = None, points: int = KDE_GRID_POINTS):
    """Gaussian KDE on a uniform grid spanning ``[min - 3h, max + 3h]``."""
    v = np.asarray(column, dtype=np.float64).ravel()
    if v.size < 2:
        raise ShapeError("KDE needs at least two points")
    h = silverman_bandwidth(v) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ShapeError("KDE bandwidth is zero (constant column)")
    grid = np.linspace(v.min() - 3 * h, v.max() + 3 * h, points)
    density = np.zeros(points)
    for lo in range(0, v.size, 4096):
        u = (grid[:, None] - v[None, lo:lo + 4096]) / h
        density += np.exp(-0.5 * u * u).sum(axis=1)
    return grid, density / (v.size * h * np.sqrt(2 * np.pi))


def joint_ecdf(data, points, chunk: int = 256) -> np.ndarray:
    """Fraction of rows of ``data`` componentwise ``<=`` each evaluation point."""
    data = np.asarray(data, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    out = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], chunk):
        z = points[lo:lo + chunk]
        below = np.all(data[None, :, :] <= z[:, None, :], axis=2)
        out[lo:lo + chunk] = below.sum(axis=1)
    return out / data.shape[0]


def joint_ecdf_ks(real, synth) -> float:
    """Max |ECDF_real - ECDF_synth| over the union of both datasets' rows."""
    real = np.atleast_2d(np.asarray(real, dtype=np.float64))
    synth = np.atleast_2d(np.asarray(synth, dtype=np.float64))
    if real.shape[1] != synth.shape[1]:
        raise ShapeError(f"column counts differ: {real.shape[1]} vs {synth.shape[1]}")
    if real.shape[0] == 0 or synth.shape[0] == 0:
        raise ShapeError("KS distance needs non-empty datasets")
    points = np.concatenate([real, synth])
    return float(np.max(np.abs(joint_ecdf(real, points) - joint_ecdf(synth, points))))


# ---------------------------------------------------------------------------
# direct errors


@dataclass
class ErrorStats:
    mean: float
    max: float
    std: float
    fraction_above: dict[float, float] = field(default_factory=dict)
    n: int = 0
    n_excluded: int = 0


def relative_errors(true, generated) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``100 |gen - true| / |true|`` and the mask of rows with ``true != 0``."""
    true, generated = (np.asarray(a, dtype=np.float64).ravel() for a in (true, generated))
    if true.shape != generated.shape:
        raise ShapeError(f"length mismatch: {true.size} vs {generated.size}")
    ok = true != 0
    rel = np.full(true.shape, np.nan)
    rel[ok] = np.abs(generated[ok] - true[ok]) / np.abs(true[ok]) * 100.0
    return rel, ok


def error_stats(true, generated, thresholds=(10.0, 25.0)) -> ErrorStats:
    """Absolute relative error statistics in percent.

    ``fraction_above[thr]`` is the percentage of rows with error strictly
    greater than ``thr``.  Rows with a zero true value are excluded.
    """
    rel, ok = relative_errors(true, generated)
    rel = rel[ok]
    if rel.size == 0:
        nan = float("nan")
        return ErrorStats(nan, nan, nan, {t: nan for t in thresholds}, 0, int((~ok).sum()))
    return ErrorStats(float(rel.mean()), float(rel.max()), float(rel.std()),
                      {float(t): float(np.mean(rel > t) * 100.0) for t in thresholds},
                      int(rel.size), int((~ok).sum()))


def r_squared(true, generated) -> float:
    true, generated = (np.asarray(a, dtype=np.float64).ravel() for a in (true, generated))
    ss_res = np.sum((true - generated) ** 2)
    ss_tot = np.sum((true - true.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else float("nan")


def uq_summary(relative_stds) -> dict[str, float]:
    """Mean/max relative std (percent) over rows where it is defined."""
    vals = np.array([v for v in relative_stds if v is not None], dtype=np.float64)
    n_undefined = len(relative_stds) - vals.size
    if vals.size == 0:
        return {"mean": float("nan"), "max": float("nan"), "n": 0, "n_undefined": n_undefined}
    return {"mean": float(vals.mean()), "max": float(vals.max()), "n": int(vals.size),
            "n_undefined": int(n_undefined)}


@dataclass
class MetricsReport:
    pcc_real: np.ndarray | None = None
    pcc_synth: np.ndarray | None = None
    srcc_real: np.ndarray | None = None
    srcc_synth: np.ndarray | None = None
    ks_distance: float | None = None
    errors: ErrorStats | None = None
    r_squared: float | None = None
    uq: dict | None = None

    def items(self):
        """Flat ``(key, value)`` pairs for the text report."""
        out = []
        if self.ks_distance is not None:
            out.append(("ks_distance", self.ks_distance))
        if self.pcc_real is not None and self.pcc_synth is not None:
            out.append(("pcc_max_abs_diff", float(np.nanmax(np.abs(self.pcc_real - self.pcc_synth)))))
        if self.srcc_real is not None and self.srcc_synth is not None:
            out.append(("srcc_max_abs_diff",
                        float(np.nanmax(np.abs(self.srcc_real - self.srcc_synth)))))
        if self.errors is not None:
            e = self.errors
            out += [("error_mean_pct", e.mean), ("error_max_pct", e.max), ("error_std_pct", e.std)]
            out += [(f"error_fraction_above_{t:g}_pct", v) for t, v in e.fraction_above.items()]
            out += [("error_n", e.n), ("error_n_excluded", e.n_excluded)]
        if self.r_squared is not None:
            out.append(("r_squared", self.r_squared))
        if self.uq is not None:
            out += [(f"uq_relative_std_{k}", v) for k, v in self.uq.items()]
        return out
