"""Default HEVC Lagrangian multipliers as a function of QP and frame type."""

from __future__ import annotations

from enum import Enum

from ..core import KParetoError


class QpOutOfRange(KParetoError):
    pass


class FrameType(str, Enum):
    I = "I"
    P = "P"
    B = "B"


def default_lambda(frame_type: FrameType | str, qp: int) -> float:
    """Codec-default lambda for one frame type at quantiser ``qp`` (0..51)."""
    frame_type = FrameType(frame_type)
    if not 0 <= qp <= 51:
        raise QpOutOfRange(f"qp {qp} outside [0, 51]")
    base = 2.0 ** ((qp - 12) / 3.0)
    if frame_type is FrameType.I:
        return 0.57 * base
    if frame_type is FrameType.P:
        return 0.85 * base
    return 0.68 * max(2.0, min(4.0, (qp - 12) / 6.0)) * base


def scaled_lambda(frame_type: FrameType | str, qp: int, k: float) -> float:
    """Lambda after applying the per-clip scale factor ``k``."""
    if not k > 0:
        raise KParetoError(f"k must be positive, got {k}")
    return k * default_lambda(frame_type, qp)
