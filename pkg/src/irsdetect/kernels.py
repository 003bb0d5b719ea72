"""Backend selection for the per-trial kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used.  :func:`use_backend` switches explicitly (tests and the
benchmark use it to compare the two).
"""
from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"numpy": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "numpy"
_active = BACKENDS[BACKEND]


def use_backend(name: str) -> str:
    """Select the active backend; returns the previously active name."""
    global _active, BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; choose from {sorted(BACKENDS)}")
    previous = BACKEND
    BACKEND, _active = name, BACKENDS[name]
    return previous


def blind_stats(X):
    """``(rao, glrt_log)`` per trial for a (T, M, L) complex stack."""
    return _active.blind_stats(X)


def row_sum_energy(X):
    """``(X 1, ||X||_F^2)`` per trial for a (T, M, L) complex stack."""
    return _active.row_sum_energy(X)
