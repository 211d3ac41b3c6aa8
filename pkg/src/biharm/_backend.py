"""Pick the integration kernel at import time.

The compiled extension is used when it was built; otherwise the pure-Python
stepper. Setting ``BIHARM_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernel

try:
    from . import _kernel as _ckernel
except ImportError:  # extension not built
    _ckernel = None

if _ckernel is not None and not os.environ.get("BIHARM_PURE_PYTHON"):
    integrate_core = _ckernel.integrate_core
    BACKEND = "cython"
else:
    integrate_core = _pykernel.integrate_core
    BACKEND = "python"


def kernels():
    """Map of backend name to ``integrate_core`` for every available backend."""
    out = {"python": _pykernel.integrate_core}
    if _ckernel is not None:
        out["cython"] = _ckernel.integrate_core
    return out
