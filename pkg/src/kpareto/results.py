"""Results file: one JSON object per clip result, rewritten atomically."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

from .core import KParetoError
from .pipeline import ClipResult


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _key(r: ClipResult) -> tuple[str, str, str]:
    return (r.clip_id, r.mode.value, r.metric.value)


def dumps_results(results: Iterable[ClipResult]) -> str:
    ordered = sorted(results, key=_key)
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in ordered)


def read_results(path: str | os.PathLike) -> list[ClipResult]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"results file {path} not found")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(ClipResult.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise KParetoError(f"{path}:{lineno}: unreadable result record ({exc})") from exc
    return out


def merge_results(path: str | os.PathLike, new: Iterable[ClipResult]) -> list[ClipResult]:
    """Replace or add ``new`` records in the file at ``path``; returns the full set.

    Records are keyed by (clip, mode, metric) and written sorted, so the file
    content depends only on the set of results.
    """
    path = Path(path)
    merged = {_key(r): r for r in (read_results(path) if path.exists() else [])}
    merged.update({_key(r): r for r in new})
    results = list(merged.values())
    atomic_write_text(path, dumps_results(results))
    return sorted(results, key=_key)
