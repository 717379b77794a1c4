"""Hot numerical kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it imports; setting
``SPINLYAP_FORCE_PYTHON=1`` selects the NumPy versions regardless.
"""

import os

from . import _pykernels

if os.environ.get("SPINLYAP_FORCE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
lyapunov_grid = _impl.lyapunov_grid
vprime_scan = _impl.vprime_scan
husimi_values = _impl.husimi_values

REGION_BOUNDARY = _pykernels.REGION_BOUNDARY
REGION_I = _pykernels.REGION_I
REGION_II = _pykernels.REGION_II
REGION_III = _pykernels.REGION_III


def compiled_available() -> bool:
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


__all__ = [
    "BACKEND",
    "lyapunov_grid",
    "vprime_scan",
    "husimi_values",
    "compiled_available",
    "REGION_BOUNDARY",
    "REGION_I",
    "REGION_II",
    "REGION_III",
]
