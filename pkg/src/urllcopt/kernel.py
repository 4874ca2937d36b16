"""Backend selection for the numeric kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over. Setting ``URLLCOPT_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("URLLCOPT_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernel as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernel as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _pykernel as _impl

        BACKEND = "python"

LAW_REPEAT = _impl.LAW_REPEAT
LAW_ONE_BIT = _impl.LAW_ONE_BIT
MAX_ANTENNAS = _impl.MAX_ANTENNAS

q_function = _impl.q_function
erlang_cdf = _impl.erlang_cdf
gain_threshold = _impl.gain_threshold
loss_at = _impl.loss_at
optimize_z = _impl.optimize_z
min_bandwidth = _impl.min_bandwidth
snap_bandwidth = _impl.snap_bandwidth
solve_link = _impl.solve_link
solve_links = _impl.solve_links
fifo_queue = _impl.fifo_queue


def load(name: str):
    """Return the kernel module named ``"python"`` or ``"cython"``."""
    if name == "python":
        from . import _pykernel

        return _pykernel
    if name == "cython":
        from . import _ckernel  # type: ignore[attr-defined]

        return _ckernel
    raise ValueError(f"unknown backend {name!r}")
