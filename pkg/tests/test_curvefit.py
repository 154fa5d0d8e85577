import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kpareto.core import RDPoint
from kpareto.curvefit import (
    EmptyGrid,
    LogRateFit,
    NoCurves,
    Orientation,
    OutsideDomain,
    SampledCurve,
    SingularFit,
    fit_curve,
    pareto_envelope,
    sample_curve,
)

from conftest import monotone_curves


def on_line(rates, a=2.0, b=3.0):
    return [RDPoint(r, a + b * math.log10(r)) for r in rates]


def test_exact_line_coefficients():
    fit = fit_curve(on_line([100, 250, 600, 1000]), Orientation.D_OF_LOGR)
    np.testing.assert_allclose(fit.coeffs, (2, 3, 0, 0), atol=1e-9)
    assert fit.domain_lo == pytest.approx(2.0) and fit.domain_hi == pytest.approx(3.0)


@given(monotone_curves(n=4))
def test_four_points_interpolated(points):
    for orient in Orientation:
        fit = fit_curve(points, orient)
        x = [math.log10(p.bitrate) if orient is Orientation.D_OF_LOGR else p.distortion for p in points]
        y = [p.distortion if orient is Orientation.D_OF_LOGR else math.log10(p.bitrate) for p in points]
        np.testing.assert_allclose(fit(np.array(x)), y, atol=1e-9)


def test_raw_coeffs_agree_with_scaled_evaluation():
    pts = [RDPoint(r, d) for r, d in [(300, 31.2), (700, 34.0), (1500, 36.1), (3000, 37.9), (6000, 39.1)]]
    fit = fit_curve(pts)
    x = np.linspace(fit.domain_lo, fit.domain_hi, 7)
    np.testing.assert_allclose(np.polynomial.polynomial.polyval(x, fit.coeffs), fit(x), rtol=1e-10)


def test_six_points_on_log_line_have_zero_residuals():
    rates = [200, 400, 800, 1600, 3200, 6400]
    pts = [RDPoint(r, 30 + 5 * math.log10(r)) for r in rates]
    fit = fit_curve(pts)
    resid = fit(np.log10(rates)) - np.array([p.distortion for p in pts])
    assert np.max(np.abs(resid)) < 1e-9


def test_singular_fit():
    # three distinct distortions cannot determine a cubic
    pts = [RDPoint(r, d) for r, d in [(100, 30), (200, 30), (400, 31), (800, 32)]]
    with pytest.raises(SingularFit):
        fit_curve(pts, Orientation.LOGR_OF_D)


def test_no_extrapolation():
    fit = fit_curve(on_line([100, 250, 600, 1000]))
    with pytest.raises(OutsideDomain):
        fit(3.5)


def _fit_on_domain(lo_rate, hi_rate):
    lo, hi = math.log10(lo_rate), math.log10(hi_rate)
    return LogRateFit(coeffs=(2, 3, 0, 0), domain_lo=lo, domain_hi=hi,
                      orientation=Orientation.D_OF_LOGR,
                      scaled_coeffs=(2 + 3 * (lo + hi) / 2, 3 * (hi - lo) / 2, 0, 0))


def test_sample_grid_rules():
    s = sample_curve(fit_curve(on_line([100, 250, 600, 1000])), k=0.9)
    assert s.rate_grid[0] == 100 and s.rate_grid[-1] == 1000
    assert np.all(np.diff(s.rate_grid) == 1)
    assert s.distortions[-1] == pytest.approx(11.0, abs=1e-9)
    assert s.k == 0.9

    s = sample_curve(_fit_on_domain(100.4, 999.7), k=1.0)
    assert (s.rate_grid[0], s.rate_grid[-1]) == (101, 999)


def test_sample_empty_and_single_point_grids():
    with pytest.raises(EmptyGrid):
        sample_curve(_fit_on_domain(500.2, 500.5), k=1.0)
    assert list(sample_curve(_fit_on_domain(500.0, 500.5), k=1.0).rate_grid) == [500]


def test_envelope_single_curve_identity():
    c = SampledCurve(0.8, np.arange(10, 20), np.linspace(30, 31, 10))
    env = pareto_envelope([c])
    np.testing.assert_array_equal(env.rate_grid, c.rate_grid)
    np.testing.assert_array_equal(env.best_distortion, c.distortions)
    assert set(env.argmax_k) == {0.8}


def test_envelope_dominant_curve():
    grid = np.arange(100, 200)
    low = SampledCurve(0.7, grid, np.linspace(30, 35, grid.size))
    high = SampledCurve(0.9, grid, low.distortions + 0.5)
    env = pareto_envelope([low, high])
    np.testing.assert_array_equal(env.best_distortion, high.distortions)
    assert set(env.argmax_k) == {0.9}


def test_envelope_crossing_against_brute_force():
    grid = np.arange(10, 201)
    d1 = lambda r: 30 + 2 * math.log(r)
    d2 = lambda r: 28 + 2.5 * math.log(r)
    c1 = SampledCurve(0.7, grid, [d1(r) for r in grid])
    c2 = SampledCurve(0.8, grid, [d2(r) for r in grid])
    env = pareto_envelope([c2, c1])
    expected_k = [0.7 if d1(r) >= d2(r) else 0.8 for r in grid]
    np.testing.assert_array_equal(env.argmax_k, expected_k)
    assert env.argmax_k[grid == 54][0] == 0.7 and env.argmax_k[grid == 55][0] == 0.8
    assert env.segments() == [(10, 54, 0.7), (55, 200, 0.8)]


def test_envelope_from_fitted_curves_crossing():
    rates = [20, 40, 80, 160]
    c1 = fit_curve([RDPoint(r, 30 + 2 * math.log(r)) for r in rates])
    c2 = fit_curve([RDPoint(r, 28 + 2.5 * math.log(r)) for r in rates])
    env = pareto_envelope([sample_curve(c1, 0.7), sample_curve(c2, 0.8)])
    assert env.argmax_k[env.rate_grid == 54][0] == 0.7
    assert env.argmax_k[env.rate_grid == 55][0] == 0.8


def test_envelope_partial_overlap_and_ties():
    a = SampledCurve(0.6, np.arange(0, 5), np.zeros(5))
    b = SampledCurve(1.3, np.arange(3, 8), np.zeros(5))
    c = SampledCurve(1.1, np.arange(3, 8), np.zeros(5))
    env = pareto_envelope([a, b, c])
    np.testing.assert_array_equal(env.rate_grid, np.arange(0, 8))
    # at 3..4 all tie: k closest to 1 wins
    np.testing.assert_array_equal(env.argmax_k, [0.6, 0.6, 0.6, 1.1, 1.1, 1.1, 1.1, 1.1])
    # equal distance from 1: smaller k wins
    d = SampledCurve(0.9, np.arange(3, 8), np.zeros(5))
    assert pareto_envelope([c, d]).argmax_k[0] == 0.9


def test_envelope_requires_curves():
    with pytest.raises(NoCurves):
        pareto_envelope([])


@st.composite
def curve_sets(draw):
    n = draw(st.integers(1, 5))
    out = []
    for _ in range(n):
        start = draw(st.integers(0, 30))
        length = draw(st.integers(1, 30))
        k = draw(st.sampled_from([0.5, 0.7, 0.9, 1.0, 1.1, 1.3]))
        vals = draw(st.lists(st.floats(20, 50), min_size=length, max_size=length))
        out.append(SampledCurve(k, np.arange(start, start + length), vals))
    return out


@given(curve_sets(), st.randoms())
def test_envelope_properties(curves, rnd):
    env = pareto_envelope(curves)
    pos = {int(r): i for i, r in enumerate(env.rate_grid)}
    for c in curves:
        idx = [pos[int(r)] for r in c.rate_grid]
        assert np.all(env.best_distortion[idx] >= c.distortions)
    again = pareto_envelope([env.as_curve()])
    np.testing.assert_array_equal(again.best_distortion, env.best_distortion)
    shuffled = list(curves)
    rnd.shuffle(shuffled)
    perm = pareto_envelope(shuffled)
    np.testing.assert_array_equal(perm.best_distortion, env.best_distortion)
    np.testing.assert_array_equal(perm.argmax_k, env.argmax_k)
