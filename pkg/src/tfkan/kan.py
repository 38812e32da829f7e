"""KAN layers on a fixed uniform B-spline grid, plus a two-layer ReLU MLP.

Every layer transforms the trailing axis of its input and treats all
leading axes as batch.  A KAN layer combines a SiLU "base" path with a
B-spline path whose per-edge coefficients are scaled by a learnable
multiplier; the grid itself is fixed (no refinement).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import autodiff as ad
from .autodiff import Node

__all__ = [
    "KnotGrid",
    "basis_values",
    "basis_derivatives",
    "spline_basis",
    "KanLayer",
    "KanStack",
    "TwoLayerMlp",
    "param_count",
]


@dataclass(frozen=True)
class KnotGrid:
    """Uniform knot grid on [-1, 1] with ``order`` extension knots per side.

    ``size`` interior intervals give ``size + order`` basis functions; the
    extension knots let the bases decay smoothly to zero outside [-1, 1]
    instead of being clipped.
    """

    size: int
    order: int
    knots: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, size: int, order: int) -> "KnotGrid":
        if size < 1:
            raise ValueError(f"grid size must be >= 1, got {size}")
        if order < 0:
            raise ValueError(f"spline order must be >= 0, got {order}")
        spacing = 2.0 / size
        idx = np.arange(-order, size + order + 1, dtype=np.float64)
        knots = -1.0 + idx * spacing
        knots.setflags(write=False)
        return cls(size, order, knots)

    @property
    def basis_count(self) -> int:
        return self.size + self.order


def basis_values(x: np.ndarray, grid: KnotGrid) -> np.ndarray:
    """B-spline basis values; output appends one axis of length basis_count."""
    x = np.asarray(x, dtype=np.float64)
    flat = _kernels.basis(x.reshape(-1), grid.knots, grid.order)
    return flat.reshape(x.shape + (grid.basis_count,))


def basis_derivatives(x: np.ndarray, grid: KnotGrid) -> np.ndarray:
    """d/dx of each basis function; zeros when order == 0."""
    x = np.asarray(x, dtype=np.float64)
    _, deriv = _kernels.basis_and_derivative(x.reshape(-1), grid.knots, grid.order)
    return deriv.reshape(x.shape + (grid.basis_count,))


def spline_basis(x: Node, grid: KnotGrid) -> Node:
    """Differentiable basis evaluation; gradient flows to ``x`` via d/dx."""
    xv = x.value
    values = basis_values(xv, grid)

    def rule(g):
        if grid.order == 0:
            return (np.zeros_like(xv),)
        deriv = basis_derivatives(xv, grid)
        return ((g * deriv).sum(axis=-1),)

    if not x.requires_grad:
        return Node(values)
    return Node(values, (x,), rule, requires_grad=True)


class KanLayer:
    """One KAN layer: SiLU base path plus scaled B-spline path.

    Parameters per input/output edge: one base weight, ``basis_count``
    spline coefficients, and one spline scale, so the learnable count is
    ``in_dim * out_dim * (basis_count + 2)``.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        grid: KnotGrid,
        rng: np.random.Generator,
        name: str = "kan",
    ):
        if in_dim < 1 or out_dim < 1:
            raise ValueError(f"layer dims must be positive, got {in_dim}x{out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.grid = grid
        c = grid.basis_count
        bound = np.sqrt(6.0 / in_dim)
        self.w_base = ad.parameter(
            rng.uniform(-bound, bound, size=(in_dim, out_dim)), f"{name}.w_base"
        )
        self.w_spline = ad.parameter(
            rng.normal(0.0, 0.1 / np.sqrt(in_dim), size=(in_dim, out_dim, c)),
            f"{name}.w_spline",
        )
        self.spline_scale = ad.parameter(
            np.ones((in_dim, out_dim)), f"{name}.spline_scale"
        )

    def parameters(self) -> list[tuple[str, Node]]:
        return [
            (self.w_base.name, self.w_base),
            (self.w_spline.name, self.w_spline),
            (self.spline_scale.name, self.spline_scale),
        ]

    def __call__(self, x: Node) -> Node:
        if x.value.shape[-1] != self.in_dim:
            raise ad.ShapeError(
                f"kan layer expects trailing extent {self.in_dim}, "
                f"got shape {x.value.shape}"
            )
        c = self.grid.basis_count
        base = ad.matmul(ad.silu(x), self.w_base)

        bases = spline_basis(x, self.grid)  # [.., in, c]
        scale = ad.broadcast_to(
            ad.reshape(self.spline_scale, (self.in_dim, self.out_dim, 1)),
            (self.in_dim, self.out_dim, c),
        )
        scaled = ad.mul(self.w_spline, scale)
        weight = ad.reshape(
            ad.transpose(scaled, (0, 2, 1)), (self.in_dim * c, self.out_dim)
        )
        batch_shape = x.value.shape[:-1]
        flat = ad.reshape(bases, batch_shape + (self.in_dim * c,))
        return ad.add(base, ad.matmul(flat, weight))


class KanStack:
    """Sequential KAN layers; the usual shape here is two layers in->hidden->out."""

    def __init__(
        self,
        dims: list[int],
        grid: KnotGrid,
        rng: np.random.Generator,
        name: str = "kan_stack",
    ):
        if len(dims) < 2:
            raise ValueError("stack needs at least input and output dims")
        self.dims = list(dims)
        self.layers = [
            KanLayer(dims[i], dims[i + 1], grid, rng, f"{name}.{i}")
            for i in range(len(dims) - 1)
        ]

    def parameters(self) -> list[tuple[str, Node]]:
        return [p for layer in self.layers for p in layer.parameters()]

    def __call__(self, x: Node) -> Node:
        for layer in self.layers:
            x = layer(x)
        return x


class TwoLayerMlp:
    """in -> hidden -> out with ReLU between; the ablation stand-in for a stack."""

    def __init__(
        self, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator,
        name: str = "mlp",
    ):
        self.dims = [in_dim, hidden, out_dim]

        def dense(i, o, tag):
            bound = np.sqrt(6.0 / i)
            w = ad.parameter(rng.uniform(-bound, bound, size=(i, o)), f"{name}.{tag}.w")
            b = ad.parameter(np.zeros(o), f"{name}.{tag}.b")
            return w, b

        self.w1, self.b1 = dense(in_dim, hidden, "0")
        self.w2, self.b2 = dense(hidden, out_dim, "1")

    def parameters(self) -> list[tuple[str, Node]]:
        return [(p.name, p) for p in (self.w1, self.b1, self.w2, self.b2)]

    def __call__(self, x: Node) -> Node:
        h = ad.matmul(x, self.w1)
        h = ad.add(h, ad.broadcast_to(self.b1, h.value.shape))
        h = ad.relu(h)
        out = ad.matmul(h, self.w2)
        return ad.add(out, ad.broadcast_to(self.b2, out.value.shape))


def param_count(module) -> int:
    """Exact count of learnable scalars in anything exposing parameters()."""
    return sum(p.value.size for _, p in module.parameters())
