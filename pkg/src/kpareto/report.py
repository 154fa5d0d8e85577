"""Corpus aggregation: improvement CDFs and the gains summary table.

Improvement is ``-BD-Rate`` in percent, so positive numbers are bitrate
savings. The percentage columns count unclamped improvements; the average
column clamps each clip at zero, modelling a two-pass setup that keeps the
default encode whenever the tuned one is worse.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .core import KParetoError, MetricKind, RateControlMode
from .pipeline import ClipResult
from .results import atomic_write_text


class EmptyCorpus(KParetoError):
    pass


class Method(str, Enum):
    DIRECT = "Direct"
    PARETO = "Pareto"


DEFAULT_THRESHOLDS = tuple(i / 10 for i in range(-50, 101))

Cell = tuple[RateControlMode, MetricKind, Method]


def corpus_cdf(improvements: Sequence[float], thresholds: Iterable[float] = DEFAULT_THRESHOLDS
               ) -> list[tuple[float, float]]:
    """Fraction of clips whose improvement is at least each threshold."""
    vals = list(improvements)
    if not vals:
        raise EmptyCorpus("no improvements to aggregate")
    n = len(vals)
    return [(float(t), sum(v >= t for v in vals) / n) for t in thresholds]


@dataclass(frozen=True)
class SummaryRow:
    mode: RateControlMode
    metric: MetricKind
    method: Method
    n: int
    pct_ge_0: float
    pct_gt_1: float
    avg_final_gain: float

    def render(self) -> str:
        return (
            f"{self.mode.value.upper()} {self.metric.value.upper()} {self.method.value} "
            f"{self.pct_ge_0:.0f}% {self.pct_gt_1:.0f}% {self.avg_final_gain:.2f}%"
        )


def summary_row(mode, metric, method, improvements: Sequence[float]) -> SummaryRow:
    vals = list(improvements)
    if not vals:
        raise EmptyCorpus(f"no clips for {mode}/{metric}/{method}")
    n = len(vals)
    return SummaryRow(
        mode=RateControlMode(mode),
        metric=MetricKind(metric),
        method=Method(method),
        n=n,
        pct_ge_0=100.0 * sum(v >= 0 for v in vals) / n,
        pct_gt_1=100.0 * sum(v > 1 for v in vals) / n,
        avg_final_gain=math.fsum(max(0.0, v) for v in vals) / n,
    )


@dataclass
class CorpusReport:
    rows: list[SummaryRow]
    cdf: dict[Cell, list[tuple[float, float]]] = field(default_factory=dict)
    n_clips: int = 0

    def render(self) -> str:
        header = f"{'Mode':<5}{'Metric':<7}{'Method':<8}{'>=0%':>7}{'>1%':>7}{'AvgGain':>9}{'n':>6}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.mode.value.upper():<5}{r.metric.value.upper():<7}{r.method.value:<8}"
                f"{r.pct_ge_0:>6.0f}%{r.pct_gt_1:>6.0f}%{r.avg_final_gain:>8.2f}%{r.n:>6d}"
            )
        return "\n".join(lines)


def improvements_by_cell(clip_results: Iterable[ClipResult],
                         methods: Sequence[Method | str] = (Method.DIRECT, Method.PARETO)
                         ) -> dict[Cell, list[float]]:
    methods = [Method(m) for m in methods]
    cells: dict[Cell, list[float]] = {}
    for r in clip_results:
        for m in methods:
            v = r.pareto_improvement if m is Method.PARETO else r.direct_improvement
            if v is None:
                continue
            cells.setdefault((r.mode, r.metric, m), []).append(v)
    return cells


def _cell_order(cell: Cell):
    mode, metric, method = cell
    # CBR before CRF, PSNR before SSIM, Direct before Pareto
    return (mode.value, metric.value, method.value)


def summary_table(clip_results: Iterable[ClipResult],
                  methods: Sequence[Method | str] = (Method.DIRECT, Method.PARETO),
                  thresholds: Iterable[float] = DEFAULT_THRESHOLDS) -> CorpusReport:
    results = list(clip_results)
    cells = improvements_by_cell(results, methods)
    if not cells:
        raise EmptyCorpus("no clip results")
    thresholds = list(thresholds)
    rows, cdf = [], {}
    for cell in sorted(cells, key=_cell_order):
        rows.append(summary_row(*cell, cells[cell]))
        cdf[cell] = corpus_cdf(cells[cell], thresholds)
    return CorpusReport(rows=rows, cdf=cdf, n_clips=len({r.clip_id for r in results}))


def summary_csv(report: CorpusReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "metric", "method", "pct_ge_0", "pct_gt_1", "avg_final_gain"])
    for r in report.rows:
        w.writerow([r.mode.value.upper(), r.metric.value.upper(), r.method.value,
                    f"{r.pct_ge_0:.4f}", f"{r.pct_gt_1:.4f}", f"{r.avg_final_gain:.6f}"])
    return buf.getvalue()


def cdf_csv(report: CorpusReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "metric", "method", "threshold", "fraction"])
    for (mode, metric, method), pairs in report.cdf.items():
        for t, frac in pairs:
            w.writerow([mode.value.upper(), metric.value.upper(), method.value, f"{t:g}", f"{frac:.6f}"])
    return buf.getvalue()


def write_report(report: CorpusReport, summary_path: str | os.PathLike, cdf_path: str | os.PathLike) -> None:
    atomic_write_text(summary_path, summary_csv(report))
    atomic_write_text(cdf_path, cdf_csv(report))
