"""Encode requests/results and the cache-aware encode session."""

from __future__ import annotations

import logging
import math
import threading
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Protocol

from ..core import ClipDescriptor, KParetoError, MetricKind, OperatingPoint

log = logging.getLogger(__name__)

K_DECIMALS = 3


class EncodeError(KParetoError):
    pass


class ProcessFailed(EncodeError):
    pass


class StatsParseError(EncodeError):
    pass


class KUnsupported(EncodeError):
    pass


def k_key(k: float) -> str:
    return f"{k:.{K_DECIMALS}f}"


@dataclass(frozen=True)
class EncodeRequest:
    clip: ClipDescriptor
    op: OperatingPoint
    k: float
    tune: MetricKind = MetricKind.PSNR

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise KParetoError(f"k must be positive, got {self.k}")


@dataclass(frozen=True)
class EncodeResult:
    achieved_bitrate: float  # kbps
    psnr: float
    ssim: float
    encoder_id: str
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.achieved_bitrate > 0:
            raise EncodeError(f"achieved bitrate must be positive, got {self.achieved_bitrate}")

    def distortion(self, metric: MetricKind) -> float:
        return self.psnr if MetricKind(metric) is MetricKind.PSNR else self.ssim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncodeResult":
        return cls(
            achieved_bitrate=float(d["achieved_bitrate"]),
            psnr=float(d["psnr"]),
            ssim=float(d["ssim"]),
            encoder_id=str(d["encoder_id"]),
            wall_time=float(d.get("wall_time", 0.0)),
        )


class Backend(Protocol):
    encoder_id: str

    def run(self, request: EncodeRequest) -> EncodeResult: ...


class EncodeSession:
    """A backend plus an optional cache, counting real backend invocations.

    Thread-safe: several clips may share one session.
    """

    def __init__(self, backend: Backend, cache=None):
        self.backend = backend
        self.cache = cache
        self.invocations = 0
        self.per_clip: Counter[str] = Counter()
        self._lock = threading.Lock()

    def encode(self, request: EncodeRequest) -> EncodeResult:
        key = None
        if self.cache is not None:
            key = self.cache.key_for(request, self.backend.encoder_id)
            hit = self.cache.lookup(key)
            if hit is not None:
                return hit
        result = self.backend.run(request)
        with self._lock:
            self.invocations += 1
            self.per_clip[request.clip.id] += 1
        if self.cache is not None:
            self.cache.store(key, result)
        return result


def encode(request: EncodeRequest, backend: Backend, cache=None) -> EncodeResult:
    """One-off encode through ``cache`` (if any)."""
    return EncodeSession(backend, cache).encode(request)
