"""Backend selection for the hot numeric kernels.

The environment variable ``SCONES_NUMBA`` picks the implementation used by
:mod:`scones._kernels`:

* ``"auto"`` (default, also ``"1"``/``"on"``): compile the numba ``@njit``
  kernels when numba imports cleanly, otherwise fall back to numpy.
* ``"0"`` / ``"off"``: always use the pure-numpy fallbacks.

The flag is read once at import time. ``benchmarks/bench_kernels.py`` compares
both paths on representative workloads.
"""

from __future__ import annotations

import os

_TRUTHY = ("1", "on", "true", "yes")
_FALSY = ("0", "off", "false", "no")


def _resolve_flag() -> bool:
    raw = os.environ.get("SCONES_NUMBA", "auto").strip().lower()
    if raw in _FALSY:
        return False
    if raw not in _TRUTHY and raw not in ("auto", ""):
        raise ValueError(f"unrecognized SCONES_NUMBA value: {raw!r}")
    try:
        import numba  # noqa: F401
    except Exception:
        if raw in _TRUTHY:
            raise
        return False
    return True


NUMBA_ENABLED: bool = _resolve_flag()
