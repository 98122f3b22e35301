import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from proxjobs.errors import DegenerateDesignError, InvalidArgumentError, SizeLimitError
from proxjobs.quantreg import (
    Observation,
    QuantileFit,
    brute_force_fit,
    check_loss,
    fit_quantile_line,
    predict,
    zero_tolerance,
)


def obs(*pairs):
    return [Observation(float(x), float(y)) for x, y in pairs]


coord = st.integers(-2000, 2000).map(lambda v: v / 100)
taus = st.sampled_from([0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99])


@st.composite
def designs(draw, min_n=2, max_n=30):
    n = draw(st.integers(min_n, max_n))
    x = np.array(draw(st.lists(coord, min_size=n, max_size=n)))
    y = np.array(draw(st.lists(coord, min_size=n, max_size=n)))
    assume(not np.all(x == x[0]))
    return x, y


class TestCheckLoss:
    def test_zero_residuals(self):
        assert check_loss([0, 0, 0], 0.01) == 0

    def test_unit_residuals(self):
        assert check_loss([1.0], 0.01) == pytest.approx(0.01)
        assert check_loss([-1.0], 0.01) == pytest.approx(0.99)

    def test_hand_sum(self):
        assert check_loss([2.0, -1.0, 0.5], 0.5) == pytest.approx(1.75)

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_bad_tau(self, tau):
        with pytest.raises(InvalidArgumentError):
            check_loss([1.0], tau)

    @pytest.mark.parametrize("bad", [float("inf"), float("nan")])
    def test_non_finite_residual(self, bad):
        with pytest.raises(InvalidArgumentError):
            check_loss([0.0, bad], 0.5)

    @given(st.lists(coord, min_size=1, max_size=20), taus)
    def test_nonnegative_and_zero_only_at_zero(self, r, tau):
        loss = check_loss(r, tau)
        assert loss >= 0
        assert (loss == 0) == all(v == 0 for v in r)


class TestFit:
    def test_two_points(self):
        fit = fit_quantile_line(obs((0, 0.1), (1, 0.3)), 0.01)
        assert fit.intercept == pytest.approx(0.1, abs=1e-12)
        assert fit.slope == pytest.approx(0.2, abs=1e-12)
        assert fit.loss == pytest.approx(0, abs=1e-12)
        assert fit.n == 2 and fit.n_zero == 2

    @given(st.floats(-1, 1), st.floats(-1, 1), st.lists(coord, min_size=2, max_size=25, unique=True), taus)
    def test_collinear(self, b0, b1, xs, tau):
        pts = [Observation(x, b0 + b1 * x) for x in xs]
        fit = fit_quantile_line(pts, tau)
        assert fit.loss <= 1e-9
        assert fit.slope == pytest.approx(b1, abs=1e-9)
        assert fit.intercept == pytest.approx(b0, abs=1e-8)

    def test_three_point_example(self):
        fit = fit_quantile_line(obs((0, 0), (1, 1), (2, 0)), 0.5)
        assert fit.loss == pytest.approx(0.5)
        assert (fit.intercept, fit.slope) == (0.0, 0.0)

    def test_accepts_arrays(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([1.0, 0.0, 2.0, 1.0])
        a = fit_quantile_line((x, y), 0.3)
        b = fit_quantile_line([Observation(u, v) for u, v in zip(x, y)], 0.3)
        assert a == b

    def test_duplicates_carry_weight(self):
        base = obs((0, 0), (1, 0), (2, 0), (1, 1))
        once = fit_quantile_line(base, 0.5)
        heavy = fit_quantile_line(base + obs((1, 1), (1, 1)), 0.5)
        assert once.loss == pytest.approx(0.5)
        # y = 0 stays optimal; each copy of (1, 1) adds 0.5
        assert heavy.loss == pytest.approx(1.5)
        assert heavy.loss == pytest.approx(brute_force_fit(base + obs((1, 1), (1, 1)), 0.5).loss)
        assert heavy.n == 6

    def test_deterministic(self, rng):
        x, y = rng.normal(size=50), rng.normal(size=50)
        assert fit_quantile_line((x, y), 0.1) == fit_quantile_line((x, y), 0.1)

    def test_large_sample(self, rng):
        x = rng.uniform(np.log(50), np.log(4999), 20000)
        y = -0.09 + 0.018 * x + rng.exponential(0.05, x.size)
        fit = fit_quantile_line((x, y), 0.01)
        assert fit.n_zero >= 2
        assert fit.slope == pytest.approx(0.018, abs=0.002)

    def test_small_sample_warning(self, caplog):
        with caplog.at_level("WARNING"):
            fit = fit_quantile_line(obs((0, 0), (1, 1), (2, 3)), 0.01)
        assert fit.small_sample
        assert "1/tau" in caplog.text

    @pytest.mark.parametrize("pts", [[], obs((1, 2)), obs((1, 2), (1, 3), (1, 4))])
    def test_degenerate(self, pts):
        with pytest.raises(DegenerateDesignError):
            fit_quantile_line(pts, 0.5)

    def test_non_finite_input(self):
        with pytest.raises(InvalidArgumentError):
            fit_quantile_line((np.array([0.0, 1.0]), np.array([0.0, np.inf])), 0.5)
        with pytest.raises(InvalidArgumentError):
            Observation(float("nan"), 0.0)

    def test_bad_tau(self):
        with pytest.raises(InvalidArgumentError):
            fit_quantile_line(obs((0, 0), (1, 1)), 1.0)


class TestBruteForce:
    def test_two_points_match(self):
        pts = obs((0.5, 0.2), (3.0, 0.1))
        a, b = brute_force_fit(pts, 0.01), fit_quantile_line(pts, 0.01)
        assert (a.intercept, a.slope) == pytest.approx((b.intercept, b.slope))

    def test_three_point_example(self):
        fit = brute_force_fit(obs((0, 0), (1, 1), (2, 0)), 0.5)
        assert fit.loss == pytest.approx(0.5)
        assert fit.slope == 0.0 and fit.intercept == 0.0

    def test_tie_broken_by_smallest_slope(self):
        # at tau = 0.5 every line through one point of each x column is optimal
        pts = obs((0, 0), (0, 1), (1, 0), (1, 1))
        fit = brute_force_fit(pts, 0.5)
        assert fit.loss == pytest.approx(1.0)
        assert (fit.slope, fit.intercept) == (-1.0, 1.0)
        assert fit_quantile_line(pts, 0.5) == fit

    def test_size_limit(self):
        x = np.arange(101.0)
        with pytest.raises(SizeLimitError):
            brute_force_fit((x, x), 0.5)

    def test_degenerate(self):
        with pytest.raises(DegenerateDesignError):
            brute_force_fit(obs((1, 0), (1, 1)), 0.5)


class TestPredict:
    def test_reference_rows(self):
        # -0.084 + 0.016 ln 3000 and -0.112 + 0.021 ln 500
        assert predict(QuantileFit(0.01, -0.084, 0.016), 3000) == pytest.approx(0.0441, abs=5e-4)
        assert predict(QuantileFit(0.01, -0.112, 0.021), 500) == pytest.approx(0.0185, abs=5e-4)

    def test_clamp_at_one_inhabitant(self):
        fit = QuantileFit(0.01, -0.084, 0.016)
        assert predict(fit, 1, clamp_nonnegative=True) == 0.0
        assert predict(fit, 1) == pytest.approx(-0.084)

    @pytest.mark.parametrize("pop", [0, 0.5, -3, float("nan")])
    def test_bad_population(self, pop):
        with pytest.raises(InvalidArgumentError):
            predict(QuantileFit(0.5, 0, 0), pop)


@settings(max_examples=150, deadline=None)
@given(designs(max_n=40), taus)
def test_oracle_equivalence(design, tau):
    fit = fit_quantile_line(design, tau)
    ref = brute_force_fit(design, tau)
    assert abs(fit.loss - ref.loss) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(designs(), taus)
def test_interpolates_two_points(design, tau):
    fit = fit_quantile_line(design, tau)
    x, y = design
    r = y - fit.intercept - fit.slope * x
    assert np.count_nonzero(np.abs(r) <= zero_tolerance(y)) >= 2
    assert fit.n_zero >= 2


@settings(max_examples=100, deadline=None)
@given(designs(), taus)
def test_loss_matches_residuals(design, tau):
    fit = fit_quantile_line(design, tau)
    x, y = design
    assert fit.loss == check_loss(y - (fit.intercept + fit.slope * x), tau)


@settings(max_examples=100, deadline=None)
@given(designs(), taus)
def test_upper_bound_first_pair(design, tau):
    x, y = design
    i, j = next((i, j) for i in range(x.size) for j in range(i + 1, x.size) if x[i] != x[j])
    b1 = (y[j] - y[i]) / (x[j] - x[i])
    b0 = y[i] - b1 * x[i]
    bound = check_loss(y - b0 - b1 * x, tau)
    assert fit_quantile_line(design, tau).loss <= bound + 1e-12


@settings(max_examples=100, deadline=None)
@given(designs(), taus, st.floats(0.01, 100))
def test_y_scale(design, tau, lam):
    x, y = design
    a = fit_quantile_line((x, y), tau)
    b = fit_quantile_line((x, lam * y), tau)
    assert b.loss == pytest.approx(lam * a.loss, rel=1e-9, abs=1e-9)
    assert b.slope == pytest.approx(lam * a.slope, rel=1e-9, abs=1e-9)
    assert b.intercept == pytest.approx(lam * a.intercept, rel=1e-9, abs=1e-9)


def test_observation_lists_are_not_mutated():
    pts = obs((0, 1), (1, 2), (2, 2))
    before = list(pts)
    fit_quantile_line(pts, 0.5)
    assert pts == before
    assert math.isfinite(brute_force_fit(pts, 0.5).loss)
