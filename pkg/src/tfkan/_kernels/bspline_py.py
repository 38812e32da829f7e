"""Vectorized numpy evaluation of uniform B-spline bases (fallback backend).

Both backends share one contract: given flat samples ``x`` and a uniform
knot vector ``t[0..m]`` (m = size + 2*order intervals), return the values
(and optionally the first derivatives) of the ``m - order`` degree-``order``
basis functions at every sample, as a ``[n, m - order]`` array.  Outside
``[t[0], t[m])`` every basis is zero.
"""

import numpy as np


def _degree_zero(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    # Half-open intervals: B0_i(x) = 1 iff t[i] <= x < t[i+1].
    return ((x[:, None] >= knots[None, :-1]) & (x[:, None] < knots[None, 1:])).astype(
        np.float64
    )


def _raise_degree(b: np.ndarray, x: np.ndarray, knots: np.ndarray, d: int) -> np.ndarray:
    t = knots
    left = (x[:, None] - t[None, : -(d + 1)]) / (t[d:-1] - t[: -(d + 1)])[None, :]
    right = (t[None, d + 1 :] - x[:, None]) / (t[d + 1 :] - t[1:-d])[None, :]
    return left * b[:, :-1] + right * b[:, 1:]


def basis(x: np.ndarray, knots: np.ndarray, order: int) -> np.ndarray:
    """Values of all stored degree-``order`` bases at each sample of ``x``."""
    b = _degree_zero(x, knots)
    for d in range(1, order + 1):
        b = _raise_degree(b, x, knots, d)
    return b


def basis_and_derivative(
    x: np.ndarray, knots: np.ndarray, order: int
) -> tuple[np.ndarray, np.ndarray]:
    """Values and d/dx of all stored degree-``order`` bases at each sample."""
    b = _degree_zero(x, knots)
    for d in range(1, order):
        b = _raise_degree(b, x, knots, d)
    if order == 0:
        return b, np.zeros_like(b)
    lower = b  # degree order-1 values, one extra column
    values = _raise_degree(lower, x, knots, order)
    t = knots
    denom_l = t[order:-1] - t[: -(order + 1)]
    denom_r = t[order + 1 :] - t[1:-order]
    derivs = order * (lower[:, :-1] / denom_l[None, :] - lower[:, 1:] / denom_r[None, :])
    return values, derivs
