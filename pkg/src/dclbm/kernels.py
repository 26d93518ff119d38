"""Backend selection for the hot loops.

The compiled extension is used when it was built; set ``DCLBM_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("DCLBM_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or default)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def compressed_dot(indptr, indices, data, q):
    return _impl.compressed_dot(indptr, indices, data, q)


def estep(indptr, indices, data, q_other, scale, cost, log_mu, log_prior):
    return _impl.estep(indptr, indices, data, q_other, scale, cost, log_mu, log_prior)
