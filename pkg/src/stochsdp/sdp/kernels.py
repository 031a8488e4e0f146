"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``STOCHSDP_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _schur_py

try:
    from . import _schur as _schur_ext
except ImportError:  # extension not built
    _schur_ext = None

# above this block size the BLAS-backed numpy products beat the compiled loops
LARGE_BLOCK = 12

KERNELS = {"python": _schur_py.schur_accumulate}
if _schur_ext is not None:

    def _compiled(M, W, mats, offsets, rows):
        # every call covers blocks of one dimension
        if W.shape[-1] > LARGE_BLOCK:
            _schur_py.schur_accumulate(M, W, mats, offsets, rows)
        else:
            _schur_ext.schur_accumulate(M, W, mats, offsets, rows)

    KERNELS["cython"] = _compiled

if os.environ.get("STOCHSDP_PURE_PYTHON", "") not in ("", "0") or _schur_ext is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

schur_accumulate = KERNELS[BACKEND]
