"""B-spline kernel backend selection.

The compiled Cython kernel is used when it was built and the environment
variable ``TFKAN_PURE_PYTHON`` is not set; otherwise the vectorized numpy
implementation takes over.  ``BACKEND`` records which one is active so
callers (and the benchmark) can report it.
"""

import os

import numpy as np

from . import bspline_py

__all__ = ["BACKEND", "basis", "basis_and_derivative"]

_compiled = None
if not os.environ.get("TFKAN_PURE_PYTHON"):
    try:
        from . import _bspline as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def _as_flat64(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64).reshape(-1)


def basis(x: np.ndarray, knots: np.ndarray, order: int) -> np.ndarray:
    """Degree-``order`` basis values at flat samples ``x``, shape [n, size+order]."""
    xf = _as_flat64(x)
    kf = _as_flat64(knots)
    if _compiled is not None:
        return _compiled.basis(xf, kf, order, False)
    return bspline_py.basis(xf, kf, order)


def basis_and_derivative(
    x: np.ndarray, knots: np.ndarray, order: int
) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and first derivatives, each shaped [n, size+order]."""
    xf = _as_flat64(x)
    kf = _as_flat64(knots)
    if _compiled is not None:
        return _compiled.basis(xf, kf, order, True)
    return bspline_py.basis_and_derivative(xf, kf, order)
