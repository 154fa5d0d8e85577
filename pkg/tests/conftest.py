import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from kpareto.core import RDPoint

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_curve(rng, n=5, r_lo=150.0, r_hi=15000.0, d_lo=28.0, d_hi=48.0):
    """Strictly increasing (rate, distortion) points with reasonable spacing."""
    logr = np.sort(rng.uniform(np.log10(r_lo), np.log10(r_hi), n))
    logr = logr[0] + np.cumsum(np.r_[0, np.maximum(np.diff(logr), 0.08)])
    d = np.sort(rng.uniform(d_lo, d_hi, n))
    d = d[0] + np.cumsum(np.r_[0, np.maximum(np.diff(d), 0.3)])
    return [RDPoint(float(10 ** lr), float(q)) for lr, q in zip(logr, d)]


@st.composite
def monotone_curves(draw, n=5):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_curve(np.random.default_rng(seed), n=n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unimodal_function(seed):
    """A smooth unimodal function on [0.25, 2.0] with its minimizer inside (0.4, 1.8)."""
    g = np.random.default_rng(seed)
    m = g.uniform(0.4, 1.8)
    kind = seed % 3
    if kind == 0:
        a = g.uniform(0.5, 5.0)
        return lambda k: (k - m) ** 2 + a * (k - m) ** 4
    if kind == 1:
        s = g.uniform(0.15, 0.6)
        return lambda k: -np.exp(-((k - m) / s) ** 2)
    s = g.uniform(0.1, 0.5)
    return lambda k: np.log(np.cosh((k - m) / s))


def grid_argmin(f, lo=0.25, hi=2.0, step=1e-4):
    grid = np.arange(lo, hi + step / 2, step)
    vals = np.array([f(k) for k in grid])
    return float(grid[int(np.argmin(vals))])


def trapezoid_oracle(ref, test, n=10_000):
    """BD-Rate percent from the two log-rate fits, integrated by trapezoid on raw coefficients."""
    from kpareto.curvefit import Orientation, fit_curve

    fr, ft = fit_curve(ref, Orientation.LOGR_OF_D), fit_curve(test, Orientation.LOGR_OF_D)
    lo, hi = max(fr.domain_lo, ft.domain_lo), min(fr.domain_hi, ft.domain_hi)
    d = np.linspace(lo, hi, n)
    poly = np.polynomial.polynomial.polyval
    gap = poly(d, ft.coeffs) - poly(d, fr.coeffs)
    avg = np.sum((gap[1:] + gap[:-1]) * 0.5 * np.diff(d)) / (hi - lo)
    return (10 ** avg - 1) * 100


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
