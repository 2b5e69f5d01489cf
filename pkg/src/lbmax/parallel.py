"""Worker-count policy shared by sweeps and multi-start runs."""
from __future__ import annotations

import os

ENV_VAR = "LBMAX_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Number of worker threads: ``requested`` capped by ``LBMAX_THREADS`` (default 1)."""
    cap = os.environ.get(ENV_VAR)
    try:
        cap_n = max(1, int(cap)) if cap else None
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {cap!r}") from None
    if requested is None:
        return cap_n or 1
    return max(1, min(requested, cap_n) if cap_n else requested)
