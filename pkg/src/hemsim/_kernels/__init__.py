"""Numerical kernels behind the network and planning code.

A compiled Cython extension provides the fast path; a pure-numpy module with
identical signatures and arithmetic is the fallback.  The backend is chosen
once at import time:

* ``HEMSIM_KERNELS=python``    force the numpy fallback
* ``HEMSIM_KERNELS=compiled``  require the extension (ImportError if missing)
* unset / ``auto``             use the extension when available

``BACKEND`` names the active choice; ``benchmarks/bench_kernels.py`` compares
the two.
"""

import os

from . import _ref

_requested = os.environ.get("HEMSIM_KERNELS", "auto")
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"HEMSIM_KERNELS must be auto, python, or compiled; got {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _fast as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = None
if _impl is None:
    _impl = _ref

BACKEND = "python" if _impl is _ref else "compiled"

ACT_IDENTITY = _ref.ACT_IDENTITY
ACT_RELU = _ref.ACT_RELU
ACT_TANH = _ref.ACT_TANH
ACT_SIGMOID = _ref.ACT_SIGMOID

affine_forward = _impl.affine_forward
affine_backward = _impl.affine_backward
adam_step = _impl.adam_step
blend = _impl.blend
dp_backward_sweep = _impl.dp_backward_sweep


def available_backends():
    """Mapping of backend name -> module, for parity tests and benchmarks."""
    out = {"python": _ref}
    try:
        from . import _fast
        out["compiled"] = _fast
    except ImportError:
        pass
    return out
