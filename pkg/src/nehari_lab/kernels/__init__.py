"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``NEHARI_LAB_NO_NUMBA=1`` to
force the numpy implementations (also used automatically when numba cannot be
imported).  Both implementations stay importable as ``numpy_impl`` and
``numba_impl`` for parity tests and benchmarks.
"""

import os

from . import _numpy as numpy_impl

try:
    from . import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is optional
    numba_impl = None

_disabled = os.environ.get("NEHARI_LAB_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

if numba_impl is not None and not _disabled:
    BACKEND = "numba"
    _impl = numba_impl
else:
    BACKEND = "numpy"
    _impl = numpy_impl

neg_lap_1d = _impl.neg_lap_1d
neg_lap_2d = _impl.neg_lap_2d
neg_lap_polar = _impl.neg_lap_polar
thomas_batched = _impl.thomas_batched
two_point_max_violation = _impl.two_point_max_violation

__all__ = [
    "BACKEND",
    "numpy_impl",
    "numba_impl",
    "neg_lap_1d",
    "neg_lap_2d",
    "neg_lap_polar",
    "thomas_batched",
    "two_point_max_violation",
]
