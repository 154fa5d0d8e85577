"""Encoder backends, default lambdas and the encode cache."""

from .base import (
    Backend,
    EncodeError,
    EncodeRequest,
    EncodeResult,
    EncodeSession,
    KUnsupported,
    ProcessFailed,
    StatsParseError,
    encode,
)
from .cache import EncodeCache, make_key
from .external import ExternalBackend, ExternalEncoderConfig, X265_TEMPLATES, render_command
from .lambdas import FrameType, QpOutOfRange, default_lambda, scaled_lambda
from .synthetic import (
    SyntheticBackend,
    SyntheticClipModel,
    generate_corpus,
    ssim_from_db,
    synthetic_distortion,
)

__all__ = [
    "Backend",
    "EncodeCache",
    "EncodeError",
    "EncodeRequest",
    "EncodeResult",
    "EncodeSession",
    "ExternalBackend",
    "ExternalEncoderConfig",
    "FrameType",
    "KUnsupported",
    "ProcessFailed",
    "QpOutOfRange",
    "StatsParseError",
    "SyntheticBackend",
    "SyntheticClipModel",
    "X265_TEMPLATES",
    "default_lambda",
    "encode",
    "generate_corpus",
    "make_key",
    "render_command",
    "scaled_lambda",
    "ssim_from_db",
    "synthetic_distortion",
]
