"""Per-clip orchestration: per-range k search, envelope assembly, gains."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .bdrate import bd_rate, bd_rate_sampled
from .brentopt import OptimizationTrace, OptimizerConfig, minimize_scalar
from .core import (
    BitrateRange,
    ClipDescriptor,
    KParetoError,
    MetricKind,
    RangeLabel,
    RateControlMode,
    RDCurve,
    RDPoint,
    fullspan_points,
    range_presets,
)
from .curvefit import Orientation, ParetoEnvelope, SampledCurve, fit_curve, pareto_envelope, sample_curve
from .encoders.base import EncodeError, EncodeRequest, EncodeSession, k_key

log = logging.getLogger(__name__)


class RangeFailed(KParetoError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    mode: RateControlMode = RateControlMode.CBR
    metric: MetricKind = MetricKind.PSNR
    optimizer: OptimizerConfig = OptimizerConfig()
    fullspan: bool = True
    encode_workers: int = 1


@dataclass
class RangeResult:
    range_label: RangeLabel
    k_opt: float
    bd_rate_opt: float
    trace: OptimizationTrace
    curves: list[RDCurve]

    @property
    def gain(self) -> float:
        return max(0.0, -self.bd_rate_opt)

    @property
    def reference(self) -> RDCurve:
        return next(c for c in self.curves if k_key(c.k) == k_key(1.0))

    def to_dict(self) -> dict:
        return {
            "range": self.range_label.value,
            "k_opt": self.k_opt,
            "bd_rate_opt": self.bd_rate_opt,
            "trace": self.trace.to_dict(),
            "curves": [
                {"k": c.k, "points": [[p.bitrate, p.distortion] for p in c.points]} for c in self.curves
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, mode: RateControlMode, metric: MetricKind) -> "RangeResult":
        label = RangeLabel(d["range"])
        curves = [
            RDCurve(k=c["k"], mode=mode, metric=metric,
                    points=tuple(RDPoint(r, q) for r, q in c["points"]), range_label=label)
            for c in d["curves"]
        ]
        return cls(label, float(d["k_opt"]), float(d["bd_rate_opt"]),
                   OptimizationTrace.from_dict(d["trace"]), curves)


@dataclass
class ClipResult:
    clip_id: str
    mode: RateControlMode
    metric: MetricKind
    range_results: list[RangeResult]
    pareto_bd_rate: float
    final_gain: float
    encode_count: int
    direct_fullspan_bd_rate: float | None = None
    direct_fullspan_k: float | None = None
    fullspan_encode_count: int = 0
    envelope_segments: list[tuple[int, int, float]] = field(default_factory=list)
    failed_ranges: list[str] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failed_ranges)

    @property
    def pareto_improvement(self) -> float:
        return -self.pareto_bd_rate

    @property
    def direct_improvement(self) -> float | None:
        return None if self.direct_fullspan_bd_rate is None else -self.direct_fullspan_bd_rate

    @property
    def best_range_gain(self) -> float:
        return max((r.gain for r in self.range_results), default=0.0)

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "mode": self.mode.value,
            "metric": self.metric.value,
            "pareto_bd_rate": self.pareto_bd_rate,
            "final_gain": self.final_gain,
            "direct_fullspan_bd_rate": self.direct_fullspan_bd_rate,
            "direct_fullspan_k": self.direct_fullspan_k,
            "encode_count": self.encode_count,
            "fullspan_encode_count": self.fullspan_encode_count,
            "partial": self.partial,
            "failed_ranges": list(self.failed_ranges),
            "envelope_segments": [list(s) for s in self.envelope_segments],
            "range_results": [r.to_dict() for r in self.range_results],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClipResult":
        mode, metric = RateControlMode(d["mode"]), MetricKind(d["metric"])
        return cls(
            clip_id=d["clip_id"],
            mode=mode,
            metric=metric,
            range_results=[RangeResult.from_dict(r, mode, metric) for r in d.get("range_results", [])],
            pareto_bd_rate=float(d["pareto_bd_rate"]),
            final_gain=float(d["final_gain"]),
            encode_count=int(d.get("encode_count", 0)),
            direct_fullspan_bd_rate=d.get("direct_fullspan_bd_rate"),
            direct_fullspan_k=d.get("direct_fullspan_k"),
            fullspan_encode_count=int(d.get("fullspan_encode_count", 0)),
            envelope_segments=[(int(a), int(b), float(k)) for a, b, k in d.get("envelope_segments", [])],
            failed_ranges=list(d.get("failed_ranges", [])),
        )


def _encode_one(session: EncodeSession, request: EncodeRequest):
    try:
        return session.encode(request)
    except EncodeError as exc:
        log.warning("%s %s=%d k=%s: encode failed, dropping point (%s)", request.clip.id,
                    request.op.mode.value, request.op.value, k_key(request.k), exc)
        return None


def build_rd_curve(
    clip: ClipDescriptor,
    rng: BitrateRange,
    k: float,
    session: EncodeSession,
    metric: MetricKind = MetricKind.PSNR,
    *,
    workers: int = 1,
    used: set | None = None,
) -> RDCurve:
    """Encode ``clip`` at every operating point of ``rng`` with scale ``k``.

    Failed encodes are dropped; the curve only fails if fewer than four
    points remain.
    """
    requests = [EncodeRequest(clip, op, k, metric) for op in rng.points]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _encode_one(session, r), requests))
    else:
        results = [_encode_one(session, r) for r in requests]

    points = []
    for req, res in zip(requests, results):
        if res is None:
            continue
        d = res.distortion(metric)
        if not math.isfinite(d):
            log.warning("%s: no %s for %s=%d", clip.id, metric.value, req.op.mode.value, req.op.value)
            continue
        if used is not None:
            used.add((req.op.value, k_key(k)))
        points.append(RDPoint(res.achieved_bitrate, d))
    if len(points) < len(requests):
        log.warning("%s %s k=%s: %d of %d operating points usable", clip.id, rng.label.value,
                    k_key(k), len(points), len(requests))
    return RDCurve(k=k, mode=rng.mode, metric=metric, points=tuple(points), range_label=rng.label)


def direct_optimize_range(
    clip: ClipDescriptor,
    rng: BitrateRange,
    session: EncodeSession,
    config: PipelineConfig = PipelineConfig(),
    *,
    used: set | None = None,
) -> RangeResult:
    """Brent search over k minimizing BD-Rate against the k = 1 curve of ``rng``."""
    metric = config.metric
    try:
        reference = build_rd_curve(clip, rng, 1.0, session, metric, workers=config.encode_workers, used=used)
    except KParetoError as exc:
        raise RangeFailed(f"{clip.id} {rng.label.value}: reference curve failed: {exc}") from exc
    curves: dict[str, RDCurve] = {k_key(1.0): reference}

    def objective(k: float) -> float:
        try:
            curve = build_rd_curve(clip, rng, k, session, metric, workers=config.encode_workers, used=used)
        except KParetoError as exc:
            log.warning("%s %s k=%s: curve failed (%s)", clip.id, rng.label.value, k_key(k), exc)
            return math.inf
        curves[k_key(k)] = curve
        try:
            return bd_rate(reference, curve, metric).percent
        except KParetoError as exc:
            log.warning("%s %s k=%s: BD-Rate failed (%s)", clip.id, rng.label.value, k_key(k), exc)
            return math.inf

    trace = minimize_scalar(objective, config.optimizer)
    ordered = [curves[key] for key in sorted(curves, key=float)]
    return RangeResult(rng.label, trace.k_best, trace.f_best, trace, ordered)


def direct_optimize_fullspan(
    clip: ClipDescriptor,
    session: EncodeSession,
    config: PipelineConfig = PipelineConfig(),
    *,
    used: set | None = None,
) -> RangeResult:
    """Single k over the union of all preset operating points (the baseline method)."""
    rng = BitrateRange(RangeLabel.FULL, tuple(fullspan_points(config.mode)))
    return direct_optimize_range(clip, rng, session, config, used=used)


def _sampled(curves: Iterable[RDCurve]) -> list[SampledCurve]:
    out = []
    for c in curves:
        try:
            out.append(sample_curve(fit_curve(c, Orientation.D_OF_LOGR), c.k))
        except KParetoError as exc:
            log.warning("k=%s: cannot sample curve (%s)", k_key(c.k), exc)
    return out


def clip_envelopes(range_results: list[RangeResult]) -> tuple[ParetoEnvelope, ParetoEnvelope, list[SampledCurve]]:
    """(default envelope, Pareto envelope, all sampled constituents)."""
    every = _sampled(c for r in range_results for c in r.curves)
    defaults = [s for s in every if k_key(s.k) == k_key(1.0)]
    return pareto_envelope(defaults), pareto_envelope(every), every


def pareto_for_clip(
    clip: ClipDescriptor,
    session: EncodeSession,
    config: PipelineConfig = PipelineConfig(),
    ranges: list[BitrateRange] | None = None,
) -> ClipResult:
    """Optimize k in each range, build the max-quality envelope over every
    evaluated curve, and score it against the k = 1 envelope."""
    ranges = ranges if ranges is not None else range_presets(config.mode)
    used: set = set()
    results, failed = [], []
    for rng in ranges:
        try:
            results.append(direct_optimize_range(clip, rng, session, config, used=used))
        except KParetoError as exc:
            log.warning("%s", exc)
            failed.append(rng.label.value)
    if len(results) < max(2, len(ranges) - 1):
        raise RangeFailed(f"{clip.id}: ranges failed: {', '.join(failed)}")

    default_env, env, _ = clip_envelopes(results)
    pareto_bd = bd_rate_sampled(default_env, env, config.metric).percent

    out = ClipResult(
        clip_id=clip.id,
        mode=config.mode,
        metric=config.metric,
        range_results=results,
        pareto_bd_rate=pareto_bd,
        final_gain=max(0.0, -pareto_bd),
        encode_count=len(used),
        envelope_segments=env.segments(),
        failed_ranges=failed,
    )
    if config.fullspan:
        full_used: set = set()
        try:
            full = direct_optimize_fullspan(clip, session, config, used=full_used)
            out.direct_fullspan_bd_rate = full.bd_rate_opt
            out.direct_fullspan_k = full.k_opt
            out.fullspan_encode_count = len(full_used)
        except KParetoError as exc:
            log.warning("%s: full-span baseline failed (%s)", clip.id, exc)
    return out


def optimize_corpus(
    clips: list[ClipDescriptor],
    session: EncodeSession,
    config: PipelineConfig = PipelineConfig(),
    *,
    workers: int = 1,
    on_result=None,
) -> tuple[list[ClipResult], list[tuple[str, str]]]:
    """Run ``pareto_for_clip`` over ``clips``; returns (results, failures).

    Results come back in input order regardless of ``workers``.
    """

    def one(clip):
        try:
            res = pareto_for_clip(clip, session, config)
        except KParetoError as exc:
            log.error("%s: %s", clip.id, exc)
            return clip, None, str(exc)
        if on_result is not None:
            on_result(res)
        return clip, res, None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, clips))
    else:
        outcomes = [one(c) for c in clips]
    results = [r for _, r, _ in outcomes if r is not None]
    failures = [(c.id, err) for c, r, err in outcomes if r is None]
    return results, failures
