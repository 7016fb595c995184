"""Backend selection for the likelihood kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Set ``RATERFIT_BACKEND=python`` to force the fallback.
"""

import os

from raterfit import _pykernels

try:
    if os.environ.get("RATERFIT_BACKEND", "").lower() == "python":
        raise ImportError("compiled backend disabled by RATERFIT_BACKEND")
    from raterfit import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
AVAILABLE = ("python", "cython") if _ckernels is not None else ("python",)


def kernel_class(backend=None):
    backend = backend or BACKEND
    if backend == "cython":
        if _ckernels is None:
            raise ImportError("the compiled kernel extension is not built")
        return _ckernels.Kernel
    if backend == "python":
        return _pykernels.Kernel
    raise ValueError(f"unknown kernel backend {backend!r}")
