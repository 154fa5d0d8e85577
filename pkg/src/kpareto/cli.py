"""Command-line entry point: ``kpareto optimize | bdrate | report``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import threading
from dataclasses import dataclass
from pathlib import Path

from .bdrate import NoOverlap, bd_rate
from .brentopt import OptimizerConfig
from .core import ClipDescriptor, KParetoError, MetricKind, RateControlMode, RDPoint
from .encoders import (
    EncodeCache,
    EncodeSession,
    ExternalBackend,
    ExternalEncoderConfig,
    SyntheticBackend,
    generate_corpus,
)
from .pipeline import PipelineConfig, optimize_corpus
from .report import EmptyCorpus, Method, summary_table, write_report
from .results import merge_results, read_results

log = logging.getLogger("kpareto")

EXIT_OK, EXIT_CONFIG, EXIT_NO_OVERLAP, EXIT_PARTIAL = 0, 1, 2, 3
CACHE_ENV = "KPARETO_CACHE"
DEFAULT_CACHE = "kpareto_cache.jsonl"


class ConfigError(KParetoError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: RateControlMode
    metric: MetricKind
    backend: str
    results_path: Path
    cache_path: Path | None
    encoder_config_path: Path | None = None
    manifest_path: Path | None = None
    synth_clips: int = 0
    seed: int = 0
    parallelism: int = 1
    encode_workers: int = 1
    optimizer: OptimizerConfig = OptimizerConfig()
    fullspan: bool = True

    def __post_init__(self):
        if self.parallelism < 1 or self.encode_workers < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.backend == "external":
            if self.encoder_config_path is None or not self.encoder_config_path.exists():
                raise ConfigError("external backend needs an existing --encoder-config")
            if self.manifest_path is None or not self.manifest_path.exists():
                raise ConfigError("external backend needs an existing --manifest")
        elif self.backend != "synthetic":
            raise ConfigError(f"unknown backend {self.backend!r}")


def read_manifest(path: Path) -> list[ClipDescriptor]:
    """CSV with columns id, source_path and optionally frame_count, width, height."""
    clips = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if not row.get("id"):
                continue
            clips.append(ClipDescriptor(
                id=row["id"].strip(),
                source_path=row["source_path"].strip(),
                frame_count=int(row.get("frame_count") or 150),
                resolution=(int(row.get("width") or 1920), int(row.get("height") or 1080)),
            ))
    ids = [c.id for c in clips]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate clip ids")
    return clips


def read_curve_file(path: str | os.PathLike) -> list[RDPoint]:
    """Two-column CSV (bitrate_kbps, distortion); a non-numeric first row is a header."""
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                rate, dist = float(cells[0]), float(cells[1])
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ConfigError(f"{path}: line {i + 1}: expected two numbers, got {row!r}")
            points.append(RDPoint(rate, dist))
    return points


def _optimizer_from(args) -> OptimizerConfig:
    base = OptimizerConfig()
    return OptimizerConfig(
        lo=args.k_lo if args.k_lo is not None else base.lo,
        hi=args.k_hi if args.k_hi is not None else base.hi,
        xtol=args.xtol if args.xtol is not None else base.xtol,
        max_evals=args.max_evals if args.max_evals is not None else base.max_evals,
    )


def run_config_from_args(args) -> RunConfig:
    if args.no_cache:
        cache = None
    else:
        cache = Path(args.cache or os.environ.get(CACHE_ENV) or DEFAULT_CACHE)
    return RunConfig(
        mode=RateControlMode(args.mode),
        metric=MetricKind(args.metric),
        backend=args.backend,
        results_path=Path(args.results),
        cache_path=cache,
        encoder_config_path=Path(args.encoder_config) if args.encoder_config else None,
        manifest_path=Path(args.manifest) if args.manifest else None,
        synth_clips=args.synth_clips,
        seed=args.seed,
        parallelism=args.parallelism,
        encode_workers=args.encode_workers,
        optimizer=_optimizer_from(args),
        fullspan=not args.no_fullspan,
    )


def cmd_optimize(cfg: RunConfig) -> int:
    if cfg.backend == "synthetic":
        corpus = generate_corpus(cfg.synth_clips, cfg.seed)
        clips = [c for c, _ in corpus]
        backend = SyntheticBackend({c.id: m for c, m in corpus})
    else:
        clips = read_manifest(cfg.manifest_path)
        backend = ExternalBackend(ExternalEncoderConfig.from_json(cfg.encoder_config_path),
                                  max_parallel=cfg.parallelism * cfg.encode_workers)
    if not clips:
        print("error: no clips", file=sys.stderr)
        return EXIT_CONFIG

    session = EncodeSession(backend, EncodeCache(cfg.cache_path))
    pipeline_cfg = PipelineConfig(mode=cfg.mode, metric=cfg.metric, optimizer=cfg.optimizer,
                                  fullspan=cfg.fullspan, encode_workers=cfg.encode_workers)
    lock = threading.Lock()

    def save(result):
        with lock:
            merge_results(cfg.results_path, [result])

    results, failures = optimize_corpus(clips, session, pipeline_cfg, workers=cfg.parallelism, on_result=save)
    if results:
        merge_results(cfg.results_path, results)
    partial = [r.clip_id for r in results if r.partial]
    print(f"{len(results)} clip results -> {cfg.results_path}; "
          f"{session.invocations} new encodes; {len(failures)} failed; {len(partial)} partial")
    for clip_id, err in failures:
        print(f"  failed {clip_id}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures or partial else EXIT_OK


def cmd_bdrate(curve_a: str, curve_b: str, metric: str | None = None) -> int:
    a, b = read_curve_file(curve_a), read_curve_file(curve_b)
    if metric is None:
        metric = "ssim" if all(p.distortion <= 1.0 for p in a + b) else "psnr"
    try:
        res = bd_rate(a, b, metric)
    except NoOverlap as exc:
        print(f"error: no overlap: {exc}", file=sys.stderr)
        return EXIT_NO_OVERLAP
    print(f"BD-Rate: {res.percent:.2f}%")
    print(f"Overlap: {res.overlap_lo:.2f} .. {res.overlap_hi:.2f}")
    return EXIT_OK


def cmd_report(results_path: str, summary_path: str | None = None, cdf_path: str | None = None,
               methods=(Method.DIRECT, Method.PARETO)) -> int:
    path = Path(results_path)
    results = read_results(path)
    try:
        report = summary_table(results, methods)
    except EmptyCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary_path = summary_path or path.with_name(path.stem + "_summary.csv")
    cdf_path = cdf_path or path.with_name(path.stem + "_cdf.csv")
    write_report(report, summary_path, cdf_path)
    print(report.render())
    print(f"summary -> {summary_path}\ncdf -> {cdf_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpareto", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="per-range k search and Pareto envelope for every clip")
    o.add_argument("--backend", choices=["synthetic", "external"], default="synthetic")
    o.add_argument("--mode", choices=["cbr", "crf"], default="cbr")
    o.add_argument("--metric", choices=["psnr", "ssim"], default="psnr")
    o.add_argument("--encoder-config", help="JSON encoder config (external backend)")
    o.add_argument("--manifest", help="clip manifest CSV (external backend)")
    o.add_argument("--synth-clips", type=int, default=10)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--cache", help=f"encode cache file (default ${CACHE_ENV} or {DEFAULT_CACHE})")
    o.add_argument("--no-cache", action="store_true")
    o.add_argument("--results", default="results.jsonl")
    o.add_argument("--parallelism", type=int, default=1, help="clips processed concurrently")
    o.add_argument("--encode-workers", type=int, default=1, help="concurrent encodes per RD curve")
    o.add_argument("--k-lo", type=float)
    o.add_argument("--k-hi", type=float)
    o.add_argument("--xtol", type=float)
    o.add_argument("--max-evals", type=int)
    o.add_argument("--no-fullspan", action="store_true", help="skip the single-k full-span baseline")

    b = sub.add_parser("bdrate", help="BD-Rate between two curve CSV files")
    b.add_argument("reference")
    b.add_argument("test")
    b.add_argument("--metric", choices=["psnr", "ssim"])

    r = sub.add_parser("report", help="summary table and CDF CSVs from a results file")
    r.add_argument("results")
    r.add_argument("--summary-csv")
    r.add_argument("--cdf-csv")
    r.add_argument("--methods", default="Direct,Pareto")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "optimize":
            return cmd_optimize(run_config_from_args(args))
        if args.command == "bdrate":
            return cmd_bdrate(args.reference, args.test, args.metric)
        methods = [Method(m.strip()) for m in args.methods.split(",") if m.strip()]
        return cmd_report(args.results, args.summary_csv, args.cdf_csv, methods)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
