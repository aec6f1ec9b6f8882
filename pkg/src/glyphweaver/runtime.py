"""A module containing process-wide runtime knobs read from the environment."""

import os

from glyphweaver.errors import ConfigError

THREADS_ENV = "CFE_THREADS"


def worker_threads() -> int:
    """Worker count for rendering and evaluation: CFE_THREADS if set, else min(4, cpu count)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return min(4, os.cpu_count() or 1)
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
    return threads
