"""Hot-kernel backend selection.

A compiled (Cython) core is preferred when built; a numpy implementation is
the fallback.  The choice happens once at import.  GCGEIG_BACKEND=numpy or
GCGEIG_BACKEND=compiled forces a backend; tests switch at runtime through
use_backend().
"""

import os

from . import _numpy_impl

try:
    from . import _cy as _compiled_impl
except ImportError:
    _compiled_impl = None

_IMPLS = {"numpy": _numpy_impl}
if _compiled_impl is not None:
    _IMPLS["compiled"] = _compiled_impl


def _initial():
    wanted = os.environ.get("GCGEIG_BACKEND")
    if wanted:
        if wanted not in _IMPLS:
            raise ImportError(
                f"GCGEIG_BACKEND={wanted!r} unavailable; have {sorted(_IMPLS)}"
            )
        return _IMPLS[wanted]
    return _IMPLS.get("compiled", _numpy_impl)


_impl = _initial()


def available_backends():
    return sorted(_IMPLS)


def backend_name():
    return _impl.name


def use_backend(name):
    """Switch backends at runtime (testing / benchmarking hook)."""
    global _impl
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_IMPLS)}")
    _impl = _IMPLS[name]
    return _impl.name


def csr_matvec(indptr, indices, data, x, out):
    return _impl.csr_matvec(indptr, indices, data, x, out)


def inner_product(x, y, out, chunk, deterministic):
    return _impl.inner_product(x, y, out, chunk, deterministic)


def axpby(alpha, x, beta, y):
    return _impl.axpby(alpha, x, beta, y)
