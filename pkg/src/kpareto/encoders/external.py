"""Adapter that runs a real encoder binary from a command template."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..core import KParetoError, RateControlMode
from .base import (
    EncodeRequest,
    EncodeResult,
    KUnsupported,
    ProcessFailed,
    StatsParseError,
    k_key,
)

log = logging.getLogger(__name__)

PLACEHOLDERS = ("{input}", "{output}", "{crf}", "{bitrate}", "{k}", "{tune}", "{csv}")
RATE_PLACEHOLDER = {RateControlMode.CRF: "{crf}", RateControlMode.CBR: "{bitrate}"}

# x265 invocations with the k flag left to the user's patched build.
X265_TEMPLATES = {
    RateControlMode.CRF: (
        "x265 --input {input} --crf {crf} --tune-{tune} --{tune} "
        "--csv-log-level 2 --csv {csv} --output {output}"
    ),
    RateControlMode.CBR: (
        "x265 --input {input} --bitrate {bitrate} --tune-{tune} --{tune} "
        "--csv-log-level 2 --csv {csv} --output {output}"
    ),
}

X265_STATS = {
    "bitrate": {"column": "Bitrate"},
    "psnr": {"column": "Global PSNR"},
    "ssim": {"column": "SSIM"},
}


@dataclass
class ExternalEncoderConfig:
    """How to invoke the encoder and where to read bitrate/PSNR/SSIM from.

    Each entry of ``stats`` is one of ``{"column": name}`` (optionally with
    ``"aggregate": "last" | "mean"``) read from the CSV the encoder writes,
    ``{"pattern": regex}`` matched against the process's stdout+stderr with the
    value in group 1, or, for ``bitrate`` only, ``{"from_size": true}`` which
    uses the output file size and ``frame_count / fps``.
    """

    command_templates: dict[RateControlMode, str] = field(default_factory=lambda: dict(X265_TEMPLATES))
    stats: dict[str, dict] = field(default_factory=lambda: dict(X265_STATS))
    timeout: float = 3600.0
    work_dir: Path = Path("encodes")
    csv_delimiter: str = ","
    fps: float = 30.0
    encoder_id: str = "x265"
    output_suffix: str = ".mp4"

    def __post_init__(self):
        self.command_templates = {RateControlMode(m): t for m, t in self.command_templates.items()}
        self.work_dir = Path(self.work_dir)
        for mode, tmpl in self.command_templates.items():
            for ph in ("{input}", "{output}"):
                if ph not in tmpl:
                    raise KParetoError(f"{mode.value} template lacks {ph}")
            present = [ph for ph in RATE_PLACEHOLDER.values() if ph in tmpl]
            if present != [RATE_PLACEHOLDER[mode]]:
                raise KParetoError(
                    f"{mode.value} template must contain {RATE_PLACEHOLDER[mode]} and not the other rate placeholder"
                )
        for name in ("bitrate", "psnr", "ssim"):
            if name not in self.stats:
                raise KParetoError(f"stats extraction for {name!r} missing")

    def supports_k(self, mode: RateControlMode) -> bool:
        return "{k}" in self.command_templates[RateControlMode(mode)]

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExternalEncoderConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "command_templates" in raw:
            raw["command_templates"] = {RateControlMode(m.lower()): t for m, t in raw["command_templates"].items()}
        if "stats" in raw:
            raw["stats"] = {**X265_STATS, **raw["stats"]}
        return cls(**raw)


def _stem(request: EncodeRequest) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", request.clip.id)
    return f"{safe}_{request.op.mode.value}{request.op.value}_k{k_key(request.k)}_{request.tune.value}"


def render_command(config: ExternalEncoderConfig, request: EncodeRequest) -> tuple[list[str], Path, Path]:
    """argv for ``request`` plus the output and CSV paths it will write."""
    mode = request.op.mode
    if mode not in config.command_templates:
        raise KParetoError(f"no command template for {mode.value}")
    if k_key(request.k) != k_key(1.0) and not config.supports_k(mode):
        raise KUnsupported(f"template has no {{k}} placeholder; cannot encode k={request.k}")
    stem = _stem(request)
    output = config.work_dir / (stem + config.output_suffix)
    csv_path = config.work_dir / (stem + ".csv")
    values = {
        "{input}": request.clip.source_path,
        "{output}": str(output),
        "{csv}": str(csv_path),
        "{crf}": str(request.op.value),
        "{bitrate}": str(request.op.value),
        "{k}": k_key(request.k),
        "{tune}": request.tune.value,
    }
    argv = []
    for token in shlex.split(config.command_templates[mode]):
        for ph, val in values.items():
            token = token.replace(ph, val)
        argv.append(token)
    return argv, output, csv_path


def _csv_value(path: Path, column: str, delimiter: str, aggregate: str) -> float:
    try:
        with open(path, newline="", encoding="utf-8", errors="replace") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    except OSError as exc:
        raise StatsParseError(f"cannot read stats CSV {path}: {exc}") from exc
    if len(rows) < 2:
        raise StatsParseError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    if column not in header:
        raise StatsParseError(f"{path}: column {column!r} not in header")
    idx = header.index(column)
    vals = []
    for r in rows[1:]:
        try:
            vals.append(float(r[idx]))
        except (IndexError, ValueError):
            continue
    if not vals:
        raise StatsParseError(f"{path}: no numeric values in column {column!r}")
    return vals[-1] if aggregate == "last" else sum(vals) / len(vals)


def extract_field(name: str, spec: dict, *, csv_path: Path, output: Path, log_text: str,
                  config: ExternalEncoderConfig, frame_count: int) -> float:
    if "column" in spec:
        return _csv_value(csv_path, spec["column"], config.csv_delimiter, spec.get("aggregate", "last"))
    if "pattern" in spec:
        m = re.search(spec["pattern"], log_text)
        if m is None:
            raise StatsParseError(f"{name}: pattern {spec['pattern']!r} unmatched")
        return float(m.group(1))
    if spec.get("from_size") and name == "bitrate":
        try:
            bits = output.stat().st_size * 8
        except OSError as exc:
            raise StatsParseError(f"cannot stat {output}: {exc}") from exc
        return bits / (frame_count / config.fps) / 1000.0
    raise StatsParseError(f"{name}: unsupported extraction spec {spec!r}")


class ExternalBackend:
    """Runs one encoder process per request, at most ``max_parallel`` at a time."""

    def __init__(self, config: ExternalEncoderConfig, max_parallel: int = 1):
        self.config = config
        self.encoder_id = config.encoder_id
        self.calls = 0
        self._slots = threading.BoundedSemaphore(max(1, max_parallel))
        self._lock = threading.Lock()

    def run(self, request: EncodeRequest) -> EncodeResult:
        with self._lock:
            self.calls += 1
        with self._slots:
            return self._run(request)

    def _run(self, request: EncodeRequest) -> EncodeResult:
        argv, output, csv_path = render_command(self.config, request)
        self.config.work_dir.mkdir(parents=True, exist_ok=True)
        # x265 appends to an existing CSV
        csv_path.unlink(missing_ok=True)
        start = time.monotonic()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.config.timeout)
        except subprocess.TimeoutExpired as exc:
            raise ProcessFailed(f"{argv[0]} timed out after {self.config.timeout}s") from exc
        except OSError as exc:
            raise ProcessFailed(f"cannot run {argv[0]}: {exc}") from exc
        elapsed = time.monotonic() - start
        if proc.returncode != 0:
            tail = (proc.stderr or "").strip().splitlines()[-3:]
            raise ProcessFailed(f"{argv[0]} exited {proc.returncode}: {' | '.join(tail)}")

        ctx = dict(csv_path=csv_path, output=output, log_text=(proc.stdout or "") + (proc.stderr or ""),
                   config=self.config, frame_count=request.clip.frame_count)
        bitrate = extract_field("bitrate", self.config.stats["bitrate"], **ctx)
        metrics = {}
        for name in ("psnr", "ssim"):
            try:
                metrics[name] = extract_field(name, self.config.stats[name], **ctx)
            except StatsParseError:
                if name == request.tune.value:
                    raise
                # only the tuned metric is guaranteed to be reported
                log.warning("%s: %s unavailable, recorded as NaN", request.clip.id, name)
                metrics[name] = math.nan
        return EncodeResult(
            achieved_bitrate=bitrate,
            psnr=metrics["psnr"],
            ssim=metrics["ssim"],
            encoder_id=self.encoder_id,
            wall_time=elapsed,
        )
