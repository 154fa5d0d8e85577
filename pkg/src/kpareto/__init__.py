"""Per-clip, per-bitrate-range tuning of the Lagrangian multiplier scale k.

Finds the k minimizing BD-Rate in each of three bitrate ranges, merges every
evaluated RD curve into a max-quality envelope and scores it against the
default encode.
"""

from .bdrate import BDRateResult, NoOverlap, bd_rate, bd_rate_sampled
from .brentopt import OptimizationTrace, OptimizerConfig, minimize_scalar
from .core import (
    BitrateRange,
    ClipDescriptor,
    KParetoError,
    MetricKind,
    OperatingPoint,
    RangeLabel,
    RateControlMode,
    RDCurve,
    RDPoint,
    range_presets,
    validate_curve,
)
from .curvefit import LogRateFit, Orientation, ParetoEnvelope, SampledCurve, fit_curve, pareto_envelope, sample_curve
from .pipeline import ClipResult, PipelineConfig, RangeResult, pareto_for_clip

__version__ = "0.1.0"

__all__ = [
    "BDRateResult", "BitrateRange", "ClipDescriptor", "ClipResult", "KParetoError", "LogRateFit",
    "MetricKind", "NoOverlap", "OperatingPoint", "OptimizationTrace", "OptimizerConfig", "Orientation",
    "ParetoEnvelope", "PipelineConfig", "RDCurve", "RDPoint", "RangeLabel", "RangeResult",
    "RateControlMode", "SampledCurve", "bd_rate", "bd_rate_sampled", "fit_curve", "minimize_scalar",
    "pareto_envelope", "pareto_for_clip", "range_presets", "sample_curve", "validate_curve",
]
