"""Kernel backend selection.

The compiled extension is used when importable; set ``LAPSHRINK_BACKEND=python``
to force the numpy fallback.
"""

import os

from . import _fallback

_requested = os.environ.get("LAPSHRINK_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _fallback
        BACKEND = "python"

admm_entry_step = _impl.admm_entry_step
box_qp_min_norm = _impl.box_qp_min_norm
agglomerate = _impl.agglomerate


def backends():
    """Available kernel modules keyed by name."""
    out = {"python": _fallback}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
