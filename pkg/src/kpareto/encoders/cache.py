"""Append-only JSON-lines store of encode results."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from pathlib import Path

from .base import EncodeRequest, EncodeResult, k_key

log = logging.getLogger(__name__)

CacheKey = tuple[str, str, str, int, str, str]


def make_key(request: EncodeRequest, encoder_id: str) -> CacheKey:
    return (
        request.clip.id,
        encoder_id,
        request.op.mode.value,
        request.op.value,
        k_key(request.k),
        request.tune.value,
    )


_FIELDS = ("clip", "encoder", "mode", "value", "k", "tune")


class EncodeCache:
    """Encode results keyed on (clip, encoder, mode, value, k to 3 decimals, tune).

    With ``path=None`` the store lives in memory only. Otherwise every record
    is one JSON line appended and flushed under a lock; unreadable lines in an
    existing file are skipped with a warning. Records are never rewritten:
    storing a key that already exists keeps the first value.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[CacheKey, EncodeResult] = {}
        self._lock = threading.Lock()
        self.skipped_lines = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = tuple(rec["key"][f] for f in _FIELDS)
                    key = (str(key[0]), str(key[1]), str(key[2]), int(key[3]), str(key[4]), str(key[5]))
                    value = EncodeResult.from_dict(rec["result"])
                except (ValueError, KeyError, TypeError) as exc:
                    self.skipped_lines += 1
                    log.warning("%s:%d: skipping corrupt cache record (%s)", self.path, lineno, exc)
                    continue
                self._records.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._records

    key_for = staticmethod(make_key)

    def lookup(self, key: CacheKey) -> EncodeResult | None:
        return self._records.get(key)

    def store(self, key: CacheKey, value: EncodeResult) -> None:
        with self._lock:
            existing = self._records.get(key)
            if existing is not None:
                if existing != value:
                    log.warning("cache key %s already stored with a different result; keeping the first", key)
                return
            self._records[key] = value
            if self.path is None:
                return
            rec = {
                "key": dict(zip(_FIELDS, key)),
                "result": value.to_dict(),
                "timestamp": time.time(),
            }
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
