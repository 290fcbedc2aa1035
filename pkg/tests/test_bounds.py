import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmlab.bounds import (
    BoundConstants,
    TailCurve,
    bernstein_bound,
    curve_from_counts,
    empirical_tail,
    fit_exponent_constant,
    fit_tail_rate,
    gaussian_lipschitz_bound,
    moment_to_tail_threshold,
    subexp_tail_bound,
    tail_counts,
    talagrand_bound,
    wilson_interval,
)
from rmlab.distributions import Exponential, Laplace, sample
from rmlab.errors import InsufficientDataError, ParameterError, PreconditionError
from rmlab.seeding import SeedStream

ONE = BoundConstants(c_bernstein=1.0, C_moment_tail=1.0)


def test_bernstein_examples():
    assert bernstein_bound([1, 0, 0], 1, 2, ONE).value == pytest.approx(math.exp(-2))
    assert bernstein_bound([1, 1, 1, 1], 1, 1, ONE).value == pytest.approx(math.exp(-0.25))
    assert bernstein_bound([1, 2], 3, 0, ONE).value == 1.0


def test_bernstein_degenerate_weights():
    v = bernstein_bound([0, 0], 1, 1, ONE)
    assert v.value == 0.0 and v.degenerate


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_bernstein_decreasing_in_t(t, dt):
    a = [0.3, -1.0, 2.0]
    assert bernstein_bound(a, 1.5, t + dt).value <= bernstein_bound(a, 1.5, t).value


def test_gaussian_lipschitz():
    assert gaussian_lipschitz_bound(0, 1) == 1.0
    assert gaussian_lipschitz_bound(1.0, 1.0) == pytest.approx(math.exp(-0.5))
    assert gaussian_lipschitz_bound(2, 2) == gaussian_lipschitz_bound(1, 1)
    with pytest.raises(ParameterError):
        gaussian_lipschitz_bound(1, 0)


def test_talagrand():
    assert talagrand_bound(0) == 4.0
    assert talagrand_bound(2) == pytest.approx(4 * math.exp(-1))
    assert talagrand_bound(4) == pytest.approx(4 * math.exp(-4))


def test_moment_to_tail_arithmetic():
    assert moment_to_tail_threshold(1, 1, 1, 4, ONE) == 7.0
    assert moment_to_tail_threshold(0, 0, 2.5, 9, ONE) == 2.5
    with pytest.raises(PreconditionError):
        moment_to_tail_threshold(1, 1, 1, 0.5)


def test_moment_to_tail_laplace():
    x = np.abs(sample(Laplace(1.0), SeedStream(4), 10**6))
    thr = moment_to_tail_threshold(2, 0, 0, 5)
    assert np.mean(x >= thr) <= math.exp(-5)


def test_subexp_bound():
    assert subexp_tail_bound(3, 0) == 2.0
    assert subexp_tail_bound(2, 4 * math.log(2)) == pytest.approx(0.5)
    x = sample(Laplace(1.0), SeedStream(5), 10**6)
    t = np.linspace(0, 12, 49)
    s = tail_counts(x, t) / x.size
    assert np.all(s <= np.array([subexp_tail_bound(2, v) for v in t]))


def test_constants_validation():
    with pytest.raises(ParameterError):
        BoundConstants(c0_gauss=1.5)
    with pytest.raises(ParameterError):
        BoundConstants(c_bernstein=0)


def test_fit_exponent_constant():
    t = np.linspace(0.5, 5, 10)
    assert fit_exponent_constant(np.exp(-2 * t), t) == pytest.approx(2.0)
    assert fit_exponent_constant(np.zeros(3), np.ones(3)) == math.inf


def test_empirical_tail_trivia():
    c = empirical_tail(np.zeros(1000), [1.0])
    assert c.survival.tolist() == [0.0]
    c = empirical_tail(np.arange(1000.0), [0.0])
    assert c.survival.tolist() == [1.0]
    with pytest.raises(PreconditionError):
        empirical_tail(np.ones(10), [0.0])
    with pytest.raises(PreconditionError):
        empirical_tail(np.ones(1000), [1.0, 0.5])


def test_empirical_tail_exponential():
    x = sample(Exponential(1.0), SeedStream(6), 10**6)
    c = empirical_tail(x, [1.0])
    assert abs(c.survival[0] - math.exp(-1)) <= 3 * c.std_errors()[0]
    assert c.ci_low[0] <= math.exp(-1) <= c.ci_high[0]


def test_tail_counts_are_additive():
    x = sample(Laplace(1.0), SeedStream(7), 5000)
    t = np.linspace(0, 4, 9)
    assert np.array_equal(tail_counts(x, t), tail_counts(x[:1234], t) + tail_counts(x[1234:], t))


def test_wilson_interval_edges():
    lo, hi = wilson_interval(np.array([0, 100]), 100)
    assert lo[0] == 0.0 and 0 < hi[0] < 0.05
    assert hi[1] == 1.0 and 0.95 < lo[1] < 1


def test_fit_log_linear_exact():
    t = np.linspace(0, 3, 40)
    s = np.exp(-2 * t)
    fit = fit_tail_rate(curve_from_counts(t, s * 1e9, 10**9), fit_floor=1e-3, fit_ceiling=1.0)
    assert fit.slope == pytest.approx(-2.0, rel=1e-6)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


def test_gaussian_tail_is_better_fit_by_quadratic():
    t = np.linspace(1, 3, 50)
    y = -t**2
    lin = np.polyfit(t, y, 1)
    quad = np.polyfit(t, y, 2)
    res_lin = np.sum((y - np.polyval(lin, t)) ** 2)
    res_quad = np.sum((y - np.polyval(quad, t)) ** 2)
    curve = TailCurve(t, np.exp(y), np.exp(y), np.exp(y), 10**9)
    fit = fit_tail_rate(curve, fit_floor=1e-6, fit_ceiling=1.0)
    ss_tot = np.sum((y - y.mean()) ** 2)
    assert fit.r_squared == pytest.approx(1 - res_lin / ss_tot, rel=1e-9)
    assert fit.r_squared < 1 - res_quad / ss_tot


def test_fit_laplace_slope():
    x = sample(Laplace(1.0), SeedStream(8), 10**5)
    c = empirical_tail(x, np.linspace(0.1, 8, 60))
    assert fit_tail_rate(c).slope == pytest.approx(-1.0, rel=0.1)


def test_fit_needs_points():
    c = empirical_tail(np.zeros(1000), [0.5, 1.0])
    with pytest.raises(InsufficientDataError):
        fit_tail_rate(c)


def test_curve_csv(tmp_path):
    c = empirical_tail(np.arange(1, 1001.0), [10.0, 500.0])
    c.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "threshold,survival,ci_low,ci_high,n"
    assert len(lines) == 3
