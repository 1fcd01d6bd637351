"""Independent reference implementations used by the tests.

Each oracle is deliberately naive (loops, exhaustive enumeration, finite
differences) so that it shares no code path with the package.
"""

import itertools
import math

import numpy as np

from chfdiff import noisenet
from chfdiff.schedule import sigmoid_schedule

FD_STEP = 1e-6


def finite_difference_grads(model, x0, t, eps, schedule, c=None, h=FD_STEP):
    """Central differences of the noise loss with respect to every parameter."""
    params = [p.copy() for p in model.params()]
    out = []
    for k, p in enumerate(params):
        g = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up, _ = noisenet.noise_loss_and_grads(model.with_params(params), x0, t, eps, schedule, c)
            p[idx] = orig - h
            down, _ = noisenet.noise_loss_and_grads(model.with_params(params), x0, t, eps, schedule, c)
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_discrepancy(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``, maximised over all parameters.

    The floor keeps entries whose true value is at the finite-difference
    round-off level (~1e-10) from dominating.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def random_gradient_case(rng, data_dim, cond_dim, batch=4, hidden=(6, 5), T=50):
    """A random small model/batch pair; weights are scaled up so tanh is non-linear."""
    model = noisenet.init(int(rng.integers(1 << 30)), data_dim, cond_dim, hidden, embed_width=4)
    model = model.with_params([p * 1.5 + (0.1 * rng.standard_normal(p.shape)) for p in model.params()])
    schedule = sigmoid_schedule(T, 1e-4, 0.2, 6.0)
    x0 = rng.standard_normal((batch, data_dim))
    t = rng.integers(1, T + 1, size=batch)
    eps = rng.standard_normal((batch, data_dim))
    c = rng.standard_normal((batch, cond_dim)) if cond_dim else None
    return model, x0, t, eps, schedule, c


def brute_midranks(values):
    """Average 1-based rank of each value, by counting."""
    out = []
    for v in values:
        below = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(below + (equal + 1) / 2)
    return out


def brute_pcc(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    num = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    den = math.sqrt(math.fsum((x - ma) ** 2 for x in a) * math.fsum((y - mb) ** 2 for y in b))
    return num / den


def brute_joint_ks(real, synth):
    """Max ECDF gap over the union of rows, with triple-nested loops."""
    real, synth = [list(r) for r in real], [list(r) for r in synth]

    def ecdf(data, z):
        return sum(all(x <= q for x, q in zip(row, z)) for row in data) / len(data)

    return max(abs(ecdf(real, z) - ecdf(synth, z)) for z in itertools.chain(real, synth))


def brute_error_stats(true, generated, thresholds):
    rel = []
    for t, g in zip(true, generated):
        if t != 0:
            rel.append(abs(g - t) / abs(t) * 100.0)
    n = len(rel)
    mean = math.fsum(rel) / n
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in rel) / n)
    frac = {thr: 100.0 * sum(1 for r in rel if r > thr) / n for thr in thresholds}
    return mean, max(rel), std, frac


def linear_percentile(values, q):
    """Linear interpolation between sorted order statistics at position q*(n-1)."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)
