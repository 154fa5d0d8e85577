"""Cubic fits in log-rate, dense 1 kbps sampling and the max-over-k envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .core import KParetoError, RDCurve, RDPoint, validate_curve

# Independent-variable spread below which a fit is refused.
MIN_SPREAD = 1e-9
# Slack for float round-off at the domain edges (absolute, independent-variable units).
DOMAIN_EPS = 1e-9


class SingularFit(KParetoError):
    pass


class OutsideDomain(KParetoError):
    pass


class EmptyGrid(KParetoError):
    pass


class NoCurves(KParetoError):
    pass


class Orientation(str, Enum):
    D_OF_LOGR = "d_of_logr"  # distortion as a function of log10(kbps)
    LOGR_OF_D = "logr_of_d"  # log10(kbps) as a function of distortion


@dataclass(frozen=True)
class LogRateFit:
    """Cubic polynomial model of an RD curve.

    ``coeffs`` are in ascending degree in the raw independent variable.
    Evaluation and integration go through ``scaled_coeffs``, the same cubic
    expressed in ``u = (x - center) / half_width`` which is far better
    conditioned for narrow domains such as SSIM.
    """

    coeffs: tuple[float, float, float, float]
    domain_lo: float
    domain_hi: float
    orientation: Orientation
    scaled_coeffs: tuple[float, float, float, float]

    @property
    def center(self) -> float:
        return 0.5 * (self.domain_lo + self.domain_hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.domain_hi - self.domain_lo)

    def _to_u(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.domain_lo - DOMAIN_EPS) or np.any(x > self.domain_hi + DOMAIN_EPS):
            raise OutsideDomain(
                f"evaluation outside fit domain [{self.domain_lo}, {self.domain_hi}]"
            )
        return np.clip((x - self.center) / self.half_width, -1.0, 1.0)

    def __call__(self, x):
        y = P.polyval(self._to_u(x), self.scaled_coeffs)
        return float(y) if np.ndim(y) == 0 else y

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral of the cubic over [lo, hi] (both inside the domain)."""
        anti = P.polyint(self.scaled_coeffs)
        ulo, uhi = self._to_u([lo, hi])
        return float((P.polyval(uhi, anti) - P.polyval(ulo, anti)) * self.half_width)


def _transformed(points: Sequence[RDPoint], orientation: Orientation):
    logr = np.log10([p.bitrate for p in points])
    dist = np.array([p.distortion for p in points], dtype=float)
    if orientation is Orientation.D_OF_LOGR:
        return logr, dist
    return dist, logr


def fit_curve(points, orientation: Orientation | str = Orientation.D_OF_LOGR) -> LogRateFit:
    """Least-squares cubic through an RD curve in log-rate coordinates.

    ``points`` may be an ``RDCurve`` or anything ``validate_curve`` accepts.
    With exactly four points the cubic interpolates them.
    """
    orientation = Orientation(orientation)
    pts = points.points if isinstance(points, RDCurve) else validate_curve(points)
    x, y = _transformed(pts, orientation)

    lo, hi = float(x.min()), float(x.max())
    if hi - lo < MIN_SPREAD:
        raise SingularFit(f"independent variable spread {hi - lo:.3g} too small")
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = (x - center) / half

    vander = np.vander(u, 4, increasing=True)
    scaled, _, rank, _ = np.linalg.lstsq(vander, y, rcond=None)
    if rank < 4:
        raise SingularFit(f"design matrix rank {rank} < 4")

    # substitute u = (x - center) / half to recover raw-variable coefficients
    raw = P.Polynomial(scaled)(P.Polynomial([-center / half, 1.0 / half])).coef
    raw = np.pad(raw, (0, 4 - len(raw)))
    return LogRateFit(
        coeffs=tuple(float(c) for c in raw),
        domain_lo=lo,
        domain_hi=hi,
        orientation=orientation,
        scaled_coeffs=tuple(float(c) for c in scaled),
    )


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Distortion on an integer-kbps grid, tagged with the k that produced it."""

    k: float
    rate_grid: np.ndarray
    distortions: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.rate_grid, dtype=np.int64)
        dist = np.asarray(self.distortions, dtype=float)
        if grid.ndim != 1 or grid.shape != dist.shape or grid.size == 0:
            raise KParetoError("rate_grid and distortions must be equal-length non-empty 1-D arrays")
        if np.any(np.diff(grid) <= 0):
            raise KParetoError("rate_grid must be strictly increasing")
        if not np.all(np.isfinite(dist)):
            raise KParetoError("distortions must be finite")
        object.__setattr__(self, "rate_grid", grid)
        object.__setattr__(self, "distortions", dist)

    def __len__(self) -> int:
        return int(self.rate_grid.size)


def rate_grid_for(fit: LogRateFit) -> np.ndarray:
    if fit.orientation is not Orientation.D_OF_LOGR:
        raise KParetoError("sampling needs a D_OF_LOGR fit")
    # round-trip through log10 can land a hair off an integer endpoint
    lo = math.ceil(10.0 ** fit.domain_lo - 1e-7)
    hi = math.floor(10.0 ** fit.domain_hi + 1e-7)
    if hi < lo:
        raise EmptyGrid(
            f"no integer kbps in [{10 ** fit.domain_lo:.4f}, {10 ** fit.domain_hi:.4f}]"
        )
    return np.arange(lo, hi + 1, dtype=np.int64)


def sample_curve(fit: LogRateFit, k: float) -> SampledCurve:
    """Evaluate a D_OF_LOGR fit at every integer kbps inside its domain."""
    grid = rate_grid_for(fit)
    x = np.clip(np.log10(grid.astype(float)), fit.domain_lo, fit.domain_hi)
    return SampledCurve(k=k, rate_grid=grid, distortions=np.atleast_1d(fit(x)))


@dataclass(frozen=True, eq=False)
class ParetoEnvelope:
    rate_grid: np.ndarray
    best_distortion: np.ndarray
    argmax_k: np.ndarray

    def as_curve(self, k: float = 1.0) -> SampledCurve:
        return SampledCurve(k=k, rate_grid=self.rate_grid, distortions=self.best_distortion)

    def segments(self) -> list[tuple[int, int, float]]:
        """Runs of constant argmax k as (first_kbps, last_kbps, k)."""
        out: list[tuple[int, int, float]] = []
        for rate, k in zip(self.rate_grid.tolist(), self.argmax_k.tolist()):
            if out and out[-1][2] == k:
                out[-1] = (out[-1][0], rate, k)
            else:
                out.append((rate, rate, k))
        return out


def _tie_key(k: float) -> tuple[float, float]:
    return (abs(k - 1.0), k)


def pareto_envelope(curves: Sequence[SampledCurve]) -> ParetoEnvelope:
    """Per-rate maximum distortion over every curve that covers that rate.

    Ties go to the k closest to 1.0, then to the smaller k, so the result does
    not depend on input order.
    """
    curves = list(curves)
    if not curves:
        raise NoCurves("pareto_envelope needs at least one curve")
    # sorting by the tie key lets argmax's first-hit rule implement the tie-break
    curves.sort(key=lambda c: _tie_key(c.k))

    grid = np.unique(np.concatenate([c.rate_grid for c in curves]))
    table = np.full((len(curves), grid.size), -np.inf)
    for i, c in enumerate(curves):
        table[i, np.searchsorted(grid, c.rate_grid)] = c.distortions

    idx = np.argmax(table, axis=0)
    cols = np.arange(grid.size)
    ks = np.array([c.k for c in curves], dtype=float)
    return ParetoEnvelope(rate_grid=grid, best_distortion=table[idx, cols], argmax_k=ks[idx])
