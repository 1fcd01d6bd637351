import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chfdiff.errors import ConfigError
from chfdiff.schedule import derive_coefficients, make_schedule, sigmoid_schedule, to_csv

# product of (1 - beta) for T=200 over [1e-5, 1e-2], slope 6, from a
# 50-digit mpmath evaluation of the logistic closed form, frozen here
ALPHA_BAR_T200 = 0.36597079944319379


def logistic(s):
    return 1.0 / (1.0 + math.exp(-s))


def test_endpoints_t100():
    sch = sigmoid_schedule(100, 1e-5, 1e-2, 6.0)
    # direct evaluation of a + (b - a) * logistic(-/+6)
    assert sch.beta[0] == pytest.approx(3.4701505334781e-5, rel=1e-12)
    assert sch.beta[-1] == pytest.approx(9.9752984946652e-3, rel=1e-12)
    assert sch.beta[0] == pytest.approx(1e-5 + (1e-2 - 1e-5) * logistic(-6.0), rel=1e-14)
    assert np.all(np.diff(sch.beta) > 0)


def test_two_point_symmetry():
    a, b = 0.001, 0.2
    sch = sigmoid_schedule(2, a, b, 6.0)
    np.testing.assert_allclose(sch.beta, [a + (b - a) * logistic(-6), a + (b - a) * logistic(6)],
                               rtol=1e-15)
    assert sch.beta[0] + sch.beta[1] == pytest.approx(a + b, rel=1e-15)


def test_alpha_bar_golden_value():
    sch = sigmoid_schedule(200, 1e-5, 1e-2, 6.0)
    assert sch.alpha_bar[-1] == pytest.approx(ALPHA_BAR_T200, rel=1e-13)
    oracle = math.exp(math.fsum(math.log1p(-b) for b in sch.beta.tolist()))
    assert sch.alpha_bar[-1] == pytest.approx(oracle, rel=1e-13)


def test_derive_small_cases():
    one = derive_coefficients([0.1])
    assert one.alpha_bar.tolist() == [0.9]
    assert one.sigma[0] == pytest.approx(0.31622776601683794, rel=1e-15)
    assert derive_coefficients([0.5, 0.5]).alpha_bar.tolist() == [0.5, 0.25]


@pytest.mark.parametrize("beta", [[0.0], [1.0], [], [[0.1]], [0.2, -0.1]])
def test_derive_rejects(beta):
    with pytest.raises(ConfigError):
        derive_coefficients(beta)


@pytest.mark.parametrize("args", [(1, 1e-5, 1e-2, 6), (10, 1e-2, 1e-3, 6), (10, 0.0, 1e-2, 6),
                                  (10, 1e-5, 1.0, 6), (10, 1e-5, 1e-2, 0), (2.5, 1e-5, 1e-2, 6)])
def test_sigmoid_rejects(args):
    with pytest.raises(ConfigError):
        sigmoid_schedule(*args)


def test_unknown_schedule_name():
    with pytest.raises(ConfigError):
        make_schedule("cosine", 10, 1e-5, 1e-2, 6.0)


configs = st.tuples(st.integers(2, 400), st.floats(1e-6, 0.3), st.floats(1.001, 3.0),
                    st.floats(0.5, 12.0))


@settings(max_examples=100, deadline=None)
@given(configs)
def test_schedule_invariants(cfg):
    T, lo, ratio, slope = cfg
    hi = min(lo * ratio, 0.99)
    sch = sigmoid_schedule(T, lo, hi, slope)
    assert np.all((sch.beta > lo) & (sch.beta < hi))
    assert np.all(np.diff(sch.beta) > 0)
    assert np.all(np.diff(sch.alpha_bar) < 0)
    assert np.all((sch.alpha_bar > 0) & (sch.alpha_bar < 1))
    assert np.array_equal(sch.sigma ** 2, sch.beta) or np.allclose(sch.sigma ** 2, sch.beta, rtol=1e-15, atol=0)
    # exact running product
    assert sch.alpha_bar[0] == sch.alpha[0]
    assert np.array_equal(sch.alpha_bar[1:], sch.alpha[1:] * sch.alpha_bar[:-1])
    rec = np.sqrt(sch.alpha[1:]) * np.sqrt(sch.alpha_bar[:-1])
    assert np.max(np.abs(np.sqrt(sch.alpha_bar[1:]) - rec)) < 1e-15


def test_range_within_one_percent_at_slope_six():
    lo, hi = 1e-4, 2e-2
    sch = sigmoid_schedule(50, lo, hi, 6.0)
    span = hi - lo
    assert lo < sch.beta[0] < lo + 0.01 * span
    assert hi - 0.01 * span < sch.beta[-1] < hi


def test_at_is_one_based():
    sch = sigmoid_schedule(5)
    b, a, ab, s = sch.at(np.array([1, 5]))
    assert b.tolist() == [sch.beta[0], sch.beta[4]]
    assert sch.at(3)[2] == sch.alpha_bar[2]


def test_csv_export(tmp_path):
    sch = sigmoid_schedule(4)
    to_csv(sch, tmp_path / "s.csv", ["manifest x"])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# manifest x" and lines[1] == "t,beta,alpha,alpha_bar,sigma"
    assert len(lines) == 6 and float(lines[-1].split(",")[3]) == sch.alpha_bar[-1]
