"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``SURFGAP_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("SURFGAP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def element_matrices(params, metric, tris, backend=None):
    impl = _pick(backend)
    return impl.element_matrices(
        np.ascontiguousarray(params, dtype=np.float64),
        np.ascontiguousarray(metric, dtype=np.float64),
        np.ascontiguousarray(tris, dtype=np.int64),
    )


def shoot_radial(f, dr, lam, m, u0, w0, backend=None):
    impl = _pick(backend)
    return impl.shoot_radial(
        np.ascontiguousarray(f, dtype=np.float64), float(dr), float(lam), int(m), float(u0), float(w0)
    )


def available_backends():
    names = ["python"]
    if _compiled() is not None:
        names.insert(0, "cython")
    return names


def _compiled():
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        mod = _compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built")
        return mod
    raise ValueError(f"unknown backend {backend!r}")
