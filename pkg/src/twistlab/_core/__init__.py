"""Hot numerical kernels with a compiled core and a numpy fallback.

Two implementations of the same two kernels live here:

* ``cykernels``  - Cython extension (built by setup.py when possible),
* ``npkernels``  - vectorized numpy, always available.

The backend is chosen once at import.  ``TWISTLAB_BACKEND=numpy`` or
``=cython`` forces a choice (forcing cython raises if the extension is
missing); the default tries the extension and falls back silently.
"""

import os

from . import npkernels

_requested = os.environ.get("TWISTLAB_BACKEND", "auto").lower()

if _requested == "numpy":
    _impl = npkernels
elif _requested == "cython":
    from . import cykernels as _impl  # noqa: F401  (ImportError is the contract)
else:
    try:
        from . import cykernels as _impl
    except ImportError:
        _impl = npkernels


def backend_name() -> str:
    return "cython" if _impl is not npkernels else "numpy"


contour_velocity = _impl.contour_velocity
hermite_bicubic = _impl.hermite_bicubic

__all__ = ["contour_velocity", "hermite_bicubic", "backend_name", "npkernels"]
