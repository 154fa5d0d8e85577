"""Deterministic stand-in encoder with a rate-dependent optimal k.

Quality follows ``a + b*ln(rate)`` minus a quadratic penalty in ``ln k``
centred on an optimum that drifts log-linearly from ``k_lo_opt`` at
``r_min`` to ``k_hi_opt`` at ``r_max``. That reproduces the situation where
different k values win in different bitrate bands.
"""

from __future__ import annotations

import math
import threading
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from ..core import ClipDescriptor, KParetoError, RateControlMode
from .base import EncodeRequest, EncodeResult, k_key

# Parameter ranges for generated corpora.
CORPUS_RANGES = {
    "a": (15.0, 30.0),
    "b": (2.0, 5.0),
    "c": (0.0, 3.0),
    "k_opt": (0.5, 1.3),
}
SSIM_FLOOR = 1e-6


@dataclass(frozen=True)
class SyntheticClipModel:
    a: float = 20.0
    b: float = 3.0
    c: float = 0.0
    k_lo_opt: float = 1.0
    k_hi_opt: float = 1.0
    r_min: float = 200.0
    r_max: float = 15000.0
    r0: float = 2000.0
    crf0: int = 30
    gamma: float = 0.5
    seed: int = 0
    jitter: float = 0.0  # relative half-width of multiplicative rate noise

    def __post_init__(self):
        if not self.b > 0:
            raise KParetoError("b must be positive")
        if self.c < 0:
            raise KParetoError("c must be non-negative")
        if not (self.k_lo_opt > 0 and self.k_hi_opt > 0):
            raise KParetoError("optimal k values must be positive")
        if not 0 < self.r_min < self.r_max:
            raise KParetoError("need 0 < r_min < r_max")
        if not 0 <= self.jitter < 1:
            raise KParetoError("jitter must lie in [0, 1)")

    def k_opt(self, rate: float) -> float:
        t = (math.log(rate) - math.log(self.r_min)) / (math.log(self.r_max) - math.log(self.r_min))
        t = min(max(t, 0.0), 1.0)
        return math.exp((1.0 - t) * math.log(self.k_lo_opt) + t * math.log(self.k_hi_opt))

    def crf_rate(self, crf: int, k: float) -> float:
        return self.r0 * 2.0 ** (-(crf - self.crf0) / 6.0) * k ** (-self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)


def synthetic_distortion(model: SyntheticClipModel, rate: float, k: float) -> float:
    """PSNR-like quality (dB) of the model at ``rate`` kbps and scale ``k``."""
    if not (rate > 0 and k > 0):
        raise KParetoError("rate and k must be positive")
    miss = math.log(k) - math.log(model.k_opt(rate))
    return model.a + model.b * math.log(rate) - model.c * miss * miss


def ssim_from_db(d: float) -> float:
    return min(1.0, max(SSIM_FLOOR, 1.0 - 10.0 ** (-d / 10.0)))


def generate_corpus(n: int, seed: int) -> list[tuple[ClipDescriptor, SyntheticClipModel]]:
    """``n`` synthetic clips whose model parameters come from one seeded generator."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        lo, hi = CORPUS_RANGES["k_opt"]
        model = SyntheticClipModel(
            a=float(rng.uniform(*CORPUS_RANGES["a"])),
            b=float(rng.uniform(*CORPUS_RANGES["b"])),
            c=float(rng.uniform(*CORPUS_RANGES["c"])),
            k_lo_opt=float(rng.uniform(lo, hi)),
            k_hi_opt=float(rng.uniform(lo, hi)),
            r0=float(rng.uniform(1000.0, 4000.0)),
            gamma=float(rng.uniform(0.2, 0.8)),
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        clip = ClipDescriptor(id=f"synth-{seed}-{i:04d}", source_path=f"synthetic://{seed}/{i}")
        out.append((clip, model))
    return out


class SyntheticBackend:
    """Evaluates a ``SyntheticClipModel`` per clip; pure function of the request."""

    encoder_id = "synthetic-v1"

    def __init__(self, models: dict[str, SyntheticClipModel]):
        self.models = dict(models)
        self.calls = 0
        self._lock = threading.Lock()

    def _jitter(self, model: SyntheticClipModel, request: EncodeRequest) -> float:
        if model.jitter == 0:
            return 1.0
        tag = f"{model.seed}|{request.clip.id}|{request.op.mode.value}|{request.op.value}|{k_key(request.k)}"
        rng = np.random.default_rng(zlib.crc32(tag.encode()))
        return 1.0 + float(rng.uniform(-model.jitter, model.jitter))

    def run(self, request: EncodeRequest) -> EncodeResult:
        with self._lock:
            self.calls += 1
        try:
            model = self.models[request.clip.id]
        except KeyError:
            raise KParetoError(f"no synthetic model for clip {request.clip.id!r}") from None
        if request.op.mode is RateControlMode.CBR:
            rate = float(request.op.value)
        else:
            rate = model.crf_rate(request.op.value, request.k)
        d = synthetic_distortion(model, rate, request.k)
        return EncodeResult(
            achieved_bitrate=rate * self._jitter(model, request),
            psnr=d,
            ssim=ssim_from_db(d),
            encoder_id=self.encoder_id,
        )
