"""Numeric kernels with a compiled fast path and a pure-numpy fallback.

The compiled extension (`_speedups`, Cython + LAPACK) is preferred when it
imported cleanly; set ``CYCLEFIT_NO_SPEEDUPS=1`` to force the pure backend.
Both backends implement the same two entry points with identical semantics:

``lstsq_qr(X, y)``
    Least squares via Householder QR with a relative rank threshold.

``bootstrap_curves(y, design, user_ptr, draws, grid_design)``
    The resample-refit-predict loop that dominates bootstrap runtime.
"""

from __future__ import annotations

import os

from . import _pure

_IMPL = _pure
_NAME = "python"

if os.environ.get("CYCLEFIT_NO_SPEEDUPS", "") != "1":
    try:
        from . import _speedups  # type: ignore[attr-defined]

        _IMPL = _speedups
        _NAME = "compiled"
    except ImportError:
        pass

lstsq_qr = _IMPL.lstsq_qr
bootstrap_curves = _IMPL.bootstrap_curves


def backend_name() -> str:
    """"compiled" when the extension is active, else "python"."""
    return _NAME
