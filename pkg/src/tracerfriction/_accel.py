"""Selects the compiled core or the pure-Python fallback at import time."""

from __future__ import annotations

import os

BACKEND = "python"

if os.environ.get("TRACERFRICTION_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._core import fixed_lag_sums, history_sums, volterra_leaf  # type: ignore

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        pass

if BACKEND == "python":
    from ._fallback import fixed_lag_sums, history_sums, volterra_leaf  # noqa: F401

__all__ = ["BACKEND", "volterra_leaf", "history_sums", "fixed_lag_sums"]
