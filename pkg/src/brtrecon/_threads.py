"""Worker-count plumbing for the FFT backend."""

from __future__ import annotations

import os

_workers: int | None = None


def set_workers(n: int | None) -> None:
    global _workers
    _workers = None if n is None else max(1, int(n))


def get_workers() -> int:
    if _workers is not None:
        return _workers
    env = os.environ.get("BRT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))
