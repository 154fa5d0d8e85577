"""Bounded Brent minimization over the Lagrangian scale factor k."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from .core import KParetoError

log = logging.getLogger(__name__)

GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


class InvalidBounds(KParetoError):
    pass


class BudgetZero(KParetoError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    lo: float = 0.25
    hi: float = 2.0
    xtol: float = 1e-2
    max_evals: int = 12
    memo_decimals: int = 3

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise InvalidBounds(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if not self.xtol > 0:
            raise InvalidBounds(f"xtol must be positive, got {self.xtol}")
        if self.max_evals < 3:
            raise BudgetZero(f"max_evals must be >= 3, got {self.max_evals}")


@dataclass
class OptimizationTrace:
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    k_best: float = math.nan
    f_best: float = math.inf
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "evaluations": [[k, f] for k, f in self.evaluations],
            "k_best": self.k_best,
            "f_best": self.f_best,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationTrace":
        return cls(
            evaluations=[(float(k), float(f)) for k, f in d["evaluations"]],
            k_best=float(d["k_best"]),
            f_best=float(d["f_best"]),
            converged=bool(d["converged"]),
        )


class _BudgetSpent(Exception):
    pass


def minimize_scalar(
    objective: Callable[[float], float], config: OptimizerConfig = OptimizerConfig()
) -> OptimizationTrace:
    """Minimize ``objective`` on [config.lo, config.hi] with Brent's method.

    The opening probes are k = 1 (clamped into bounds) and the two
    golden-section points of the interval; every later probe is either a
    parabolic-interpolation step or a golden-section step. All probes are
    rounded to ``memo_decimals`` and a repeated probe is answered from memory
    without calling ``objective`` or spending budget. Non-finite objective
    values are recorded as +inf.
    """
    lo, hi = config.lo, config.hi
    quantum = 10.0 ** -config.memo_decimals
    tol1 = max(0.5 * config.xtol, quantum)
    memo: dict[float, float] = {}
    trace = OptimizationTrace()

    def probe(k: float) -> tuple[float, float]:
        k = min(max(round(k, config.memo_decimals), lo), hi)
        if k in memo:
            return k, memo[k]
        if len(trace.evaluations) >= config.max_evals:
            raise _BudgetSpent
        y = float(objective(k))
        if not math.isfinite(y):
            log.warning("objective non-finite at k=%.4f; recorded as +inf", k)
            y = math.inf
        memo[k] = y
        trace.evaluations.append((k, y))
        return k, y

    try:
        trace.converged = _brent(probe, lo, hi, config.xtol, tol1, config.max_evals)
    except _BudgetSpent:
        trace.converged = False

    # first occurrence wins ties, so a flat objective keeps the k = 1 baseline
    best = min(range(len(trace.evaluations)), key=lambda i: trace.evaluations[i][1])
    trace.k_best, trace.f_best = trace.evaluations[best]
    return trace


def _brent(probe, lo, hi, xtol, tol1, max_evals) -> bool:
    opening = [probe(1.0), probe(lo + GOLDEN * (hi - lo)), probe(hi - GOLDEN * (hi - lo))]
    ranked = sorted(opening, key=lambda p: p[1])
    (x, fx), (w, fw), (v, fv) = ranked
    probed = {k for k, _ in opening}
    a = max([k for k in probed if k < x], default=lo)
    b = min([k for k in probed if k > x], default=hi)
    d = 0.0
    e = b - a

    # memo hits cost nothing, so cap raw iterations as well as evaluations
    for _ in range(50 * max_evals):
        xm = 0.5 * (a + b)
        if max(x - a, b - x) <= xtol * (1.0 + 1e-9):
            return True

        golden = True
        if abs(e) > tol1 and math.isfinite(fx) and math.isfinite(fw) and math.isfinite(fv):
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if u - a < 2.0 * tol1 or b - u < 2.0 * tol1:
                    d = math.copysign(tol1, xm - x)
                golden = False
        if golden:
            e = (a - x) if x >= xm else (b - x)
            d = GOLDEN * e

        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        u, fu = probe(u)
        if not a < u < b or u == x:
            # rounding pushed the probe onto a known point; the bracket cannot shrink further
            return True

        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return False
