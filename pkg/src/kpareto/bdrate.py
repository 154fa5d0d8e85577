"""Bjontegaard delta rate between two RD curves.

Both variants integrate the difference of log10(rate) over the shared
distortion range and report ``(10**mean_diff - 1) * 100``: negative numbers
mean the test curve needs less bitrate for the same quality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import KParetoError, MetricKind, RDCurve
from .curvefit import Orientation, ParetoEnvelope, SampledCurve, fit_curve

log = logging.getLogger(__name__)

# Narrower distortion overlaps are rejected.
MIN_OVERLAP = {MetricKind.PSNR: 0.01, MetricKind.SSIM: 1e-9}
SAMPLED_STEPS = 1000


class NoOverlap(KParetoError):
    pass


class MetricMismatch(KParetoError):
    pass


@dataclass(frozen=True)
class BDRateResult:
    percent: float
    overlap_lo: float
    overlap_hi: float
    avg_log_diff: float  # mean of log10(R_test) - log10(R_ref) over the overlap

    @property
    def improvement(self) -> float:
        return -self.percent


def _metric_of(reference, test, metric):
    if metric is not None:
        return MetricKind(metric)
    ms = {c.metric for c in (reference, test) if isinstance(c, RDCurve)}
    if len(ms) > 1:
        raise MetricMismatch("cannot compare curves measured with different metrics")
    return ms.pop() if ms else MetricKind.PSNR


def _overlap(ref_lo, ref_hi, test_lo, test_hi, metric) -> tuple[float, float]:
    lo, hi = max(ref_lo, test_lo), min(ref_hi, test_hi)
    if hi - lo < MIN_OVERLAP[metric]:
        raise NoOverlap(f"distortion overlap [{lo:.6g}, {hi:.6g}] is empty or too narrow")
    return lo, hi


def _result(avg: float, lo: float, hi: float) -> BDRateResult:
    return BDRateResult(percent=(10.0 ** avg - 1.0) * 100.0, overlap_lo=lo, overlap_hi=hi, avg_log_diff=avg)


def bd_rate(reference, test, metric: MetricKind | str | None = None) -> BDRateResult:
    """BD-Rate of ``test`` against ``reference`` using cubic fits of log-rate over distortion.

    Inputs are ``RDCurve`` objects or raw (bitrate, distortion) point lists.
    """
    metric = _metric_of(reference, test, metric)
    f_ref = fit_curve(reference, Orientation.LOGR_OF_D)
    f_test = fit_curve(test, Orientation.LOGR_OF_D)
    lo, hi = _overlap(f_ref.domain_lo, f_ref.domain_hi, f_test.domain_lo, f_test.domain_hi, metric)
    avg = (f_test.integral(lo, hi) - f_ref.integral(lo, hi)) / (hi - lo)
    return _result(avg, lo, hi)


def _as_sampled(c) -> SampledCurve:
    if isinstance(c, ParetoEnvelope):
        return c.as_curve()
    if isinstance(c, SampledCurve):
        return c
    raise TypeError(f"expected SampledCurve or ParetoEnvelope, got {type(c).__name__}")


def _monotone(c: SampledCurve) -> tuple[np.ndarray, np.ndarray]:
    """(distortion, log10 rate) with distortion strictly increasing, ready for np.interp."""
    dist = c.distortions
    repaired = np.maximum.accumulate(dist)
    if np.any(repaired != dist):
        log.debug("k=%s: running-max repair applied to %d samples", c.k, int(np.sum(repaired != dist)))
    # keep the cheapest rate reaching each distortion level
    keep = np.concatenate(([True], np.diff(repaired) > 0))
    return repaired[keep], np.log10(c.rate_grid[keep].astype(float))


def bd_rate_sampled(reference, test, metric: MetricKind | str = MetricKind.PSNR) -> BDRateResult:
    """BD-Rate between two dense 1 kbps curves (or envelopes).

    Each curve is inverted to log-rate over distortion by linear interpolation
    and the difference is trapezoid-integrated on 1000 uniform samples.
    """
    metric = MetricKind(metric)
    ref_d, ref_lr = _monotone(_as_sampled(reference))
    test_d, test_lr = _monotone(_as_sampled(test))
    lo, hi = _overlap(ref_d[0], ref_d[-1], test_d[0], test_d[-1], metric)
    grid = np.linspace(lo, hi, SAMPLED_STEPS)
    diff = np.interp(grid, test_d, test_lr) - np.interp(grid, ref_d, ref_lr)
    avg = float(np.trapezoid(diff, grid)) / (hi - lo)
    return _result(avg, lo, hi)
