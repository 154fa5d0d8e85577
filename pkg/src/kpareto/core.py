"""Domain types and operating-point presets shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class KParetoError(ValueError):
    """Base class for all errors raised by this package."""


class TooFewPoints(KParetoError):
    pass


class NonPositiveBitrate(KParetoError):
    pass


class InvalidOperatingPoint(KParetoError):
    pass


class MetricKind(str, Enum):
    PSNR = "psnr"
    SSIM = "ssim"


class RateControlMode(str, Enum):
    CRF = "crf"
    CBR = "cbr"


class RangeLabel(str, Enum):
    LOW = "LOW"
    MED = "MED"
    HIGH = "HIGH"
    FULL = "FULL"


CRF_MIN, CRF_MAX = 0, 51
MIN_CURVE_POINTS = 4


@dataclass(frozen=True, order=True)
class OperatingPoint:
    """One CRF index or one CBR target (kbps)."""

    mode: RateControlMode
    value: int

    def __post_init__(self):
        if isinstance(self.value, bool) or int(self.value) != self.value:
            raise InvalidOperatingPoint(f"operating point value must be an integer, got {self.value!r}")
        object.__setattr__(self, "value", int(self.value))
        if self.mode is RateControlMode.CRF and not CRF_MIN <= self.value <= CRF_MAX:
            raise InvalidOperatingPoint(f"CRF {self.value} outside [{CRF_MIN}, {CRF_MAX}]")
        if self.mode is RateControlMode.CBR and self.value <= 0:
            raise InvalidOperatingPoint(f"CBR target must be positive, got {self.value}")


@dataclass(frozen=True)
class BitrateRange:
    label: RangeLabel
    points: tuple[OperatingPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < MIN_CURVE_POINTS:
            raise InvalidOperatingPoint(f"{self.label.value}: need >= {MIN_CURVE_POINTS} points")
        if len({p.mode for p in self.points}) != 1:
            raise InvalidOperatingPoint(f"{self.label.value}: mixed rate-control modes")
        values = [p.value for p in self.points]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidOperatingPoint(f"{self.label.value}: values must be strictly increasing")

    @property
    def mode(self) -> RateControlMode:
        return self.points[0].mode

    @property
    def values(self) -> list[int]:
        return [p.value for p in self.points]


@dataclass(frozen=True)
class ClipDescriptor:
    id: str
    source_path: str
    frame_count: int = 150
    resolution: tuple[int, int] = (1920, 1080)

    def __post_init__(self):
        if not self.id:
            raise KParetoError("clip id must be non-empty")
        if self.frame_count <= 0:
            raise KParetoError(f"clip {self.id}: frame_count must be positive")


@dataclass(frozen=True)
class RDPoint:
    bitrate: float  # achieved kbps
    distortion: float


@dataclass(frozen=True)
class RDCurve:
    k: float
    mode: RateControlMode
    metric: MetricKind
    points: tuple[RDPoint, ...]
    range_label: RangeLabel | None = None

    def __post_init__(self):
        if not self.k > 0:
            raise KParetoError(f"k must be positive, got {self.k}")
        object.__setattr__(self, "points", tuple(validate_curve(self.points)))
        for p in self.points:
            if not math.isfinite(p.distortion):
                raise KParetoError(f"non-finite distortion {p.distortion}")
            if self.metric is MetricKind.PSNR and p.distortion <= 0:
                raise KParetoError(f"PSNR must be positive, got {p.distortion}")
            if self.metric is MetricKind.SSIM and not 0 < p.distortion <= 1:
                raise KParetoError(f"SSIM must lie in (0, 1], got {p.distortion}")

    @property
    def bitrates(self) -> list[float]:
        return [p.bitrate for p in self.points]

    @property
    def distortions(self) -> list[float]:
        return [p.distortion for p in self.points]


def _as_point(p) -> RDPoint:
    if isinstance(p, RDPoint):
        return p
    rate, dist = p
    return RDPoint(float(rate), float(dist))


def validate_curve(raw_points: Iterable) -> list[RDPoint]:
    """Sort, de-duplicate and repair a raw list of RD measurements.

    Duplicate bitrates keep the highest distortion. A point whose distortion
    is strictly below that of some cheaper point is dropped, so the result is
    non-decreasing in distortion. Raises ``TooFewPoints`` when fewer than four
    points survive.
    """
    points = [_as_point(p) for p in raw_points]
    if not points:
        raise TooFewPoints("empty curve")
    for p in points:
        if not (p.bitrate > 0 and math.isfinite(p.bitrate)):
            raise NonPositiveBitrate(f"bitrate must be positive and finite, got {p.bitrate}")

    best: dict[float, float] = {}
    for p in points:
        if p.bitrate not in best or p.distortion > best[p.bitrate]:
            best[p.bitrate] = p.distortion

    kept: list[RDPoint] = []
    running_max = -math.inf
    for rate in sorted(best):
        d = best[rate]
        if d < running_max:
            continue
        kept.append(RDPoint(rate, d))
        running_max = d

    if len(kept) < MIN_CURVE_POINTS:
        raise TooFewPoints(f"{len(kept)} points after repair, need {MIN_CURVE_POINTS}")
    return kept


def _crf_span(start: int, step: int, stop: int) -> list[int]:
    # "start:step:stop" with an inclusive stop
    return list(range(start, stop + 1, step))


_PRESETS: dict[RateControlMode, dict[RangeLabel, list[int]]] = {
    RateControlMode.CBR: {
        RangeLabel.LOW: [256, 512, 1000, 2000, 4000],
        RangeLabel.MED: [1000, 2000, 4000, 6000, 8000],
        RangeLabel.HIGH: [4000, 6000, 8000, 10000, 12000],
    },
    RateControlMode.CRF: {
        RangeLabel.LOW: _crf_span(22, 2, 32),
        RangeLabel.MED: _crf_span(27, 2, 37),
        RangeLabel.HIGH: _crf_span(32, 2, 42),
    },
}


def range_presets(mode: RateControlMode) -> list[BitrateRange]:
    """LOW, MED and HIGH operating-point ranges for ``mode``.

    CBR values are kbps (1 Mbps = 1000 kbps). CRF ranges are listed in
    ascending CRF order, which is descending bitrate.
    """
    mode = RateControlMode(mode)
    return [
        BitrateRange(label, tuple(OperatingPoint(mode, v) for v in values))
        for label, values in _PRESETS[mode].items()
    ]


def fullspan_points(mode: RateControlMode) -> list[OperatingPoint]:
    """Union of the three preset ranges, de-duplicated and sorted."""
    values = sorted({p.value for r in range_presets(mode) for p in r.points})
    return [OperatingPoint(RateControlMode(mode), v) for v in values]


def points_from_pairs(pairs: Sequence[tuple[float, float]]) -> list[RDPoint]:
    return [_as_point(p) for p in pairs]
