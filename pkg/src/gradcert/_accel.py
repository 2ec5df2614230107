"""Backend selection for the hot kernels.

``GRADCERT_BACKEND=numpy`` forces the vectorized numpy path; the default
(``numba``) uses jitted kernels whenever numba imports cleanly.
"""
import os

try:
    import numba  # noqa: F401
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def backend(requested=None):
    """Resolve the backend name: ``"numba"`` or ``"numpy"``."""
    name = (requested or os.environ.get("GRADCERT_BACKEND", "numba")).lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name
