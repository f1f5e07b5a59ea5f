"""Kernel backend selection.

The hot inner loops (LIF simulation, row-buffer stream classification,
burst scheduling) exist twice: numba ``@njit`` versions and pure-numpy
fallbacks.  The numba backend is used when importable unless the
``SPARKXD_NUMBA`` environment variable is set to ``0``/``false``/``off``.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _kernels_numpy

_flag = os.environ.get("SPARKXD_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

if NUMBA_REQUESTED:
    try:
        from . import _kernels_numba
    except ImportError:  # numba not installed
        _kernels_numba = None
else:
    _kernels_numba = None

HAS_NUMBA = _kernels_numba is not None
BACKEND = "numba" if HAS_NUMBA else "numpy"
_impl = _kernels_numba if HAS_NUMBA else _kernels_numpy

classify_stream = _impl.classify_stream
burst_schedule = _impl.burst_schedule
lif_run = _impl.lif_run


def get_backend(name: str):
    """Return a specific kernel module ('numba' or 'numpy') for comparison."""
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        if not NUMBA_REQUESTED:
            from . import _kernels_numba as mod  # bypass the env flag on request
            return mod
        if _kernels_numba is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}")
