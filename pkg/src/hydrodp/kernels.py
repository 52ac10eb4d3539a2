"""Backend selection for the hot numerical kernels.

The compiled extension is used when importable; ``HYDRODP_PURE_PYTHON=1``
forces the numpy fallback.  ``HYDRODP_THREADS`` caps worker threads in the
compiled backend.
"""

import os

from hydrodp import _pykernels

if os.environ.get("HYDRODP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from hydrodp import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

multilinear = _impl.multilinear
select_min = _impl.select_min


def num_threads() -> int:
    raw = os.environ.get("HYDRODP_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def aggregate_stage(*args, **kwargs):
    kwargs.setdefault("num_threads", num_threads())
    return _impl.aggregate_stage(*args, **kwargs)


def backends():
    """Every importable backend, keyed by name."""
    out = {"python": _pykernels}
    try:
        from hydrodp import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
