"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Node` wraps a numpy array together with the operation that
produced it, so a forward pass builds a throwaway acyclic graph and
:func:`backward` walks it once in reverse topological order, accumulating
gradients by summation wherever a node fans out.

Shapes are strict: elementwise operations require identical shapes (Python
scalars are the only implicit exception) and any widening must go through
:func:`broadcast_to`, whose backward sums over the broadcast axes.  Graphs
are thread-confined from construction through ``backward``; distinct graphs
over shared read-only parameter values may be evaluated concurrently, but a
parameter update must be serialized against all forward passes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Node",
    "constant",
    "parameter",
    "backward",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "silu",
    "relu",
    "sigmoid_array",
    "reduce_sum",
    "mean",
    "reshape",
    "transpose",
    "broadcast_to",
    "concat",
]


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


def _as_value(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("array values must be finite (got NaN or Inf)")
    return arr


class Node:
    """One value in the computation graph.

    ``parents`` and ``backward_rule`` record how the value was produced;
    ``backward_rule`` maps the output gradient to one gradient per parent
    (``None`` for parents that need none).  Leaf nodes have no parents.
    """

    __slots__ = ("value", "parents", "backward_rule", "requires_grad", "name")

    def __init__(
        self,
        value,
        parents: tuple["Node", ...] = (),
        backward_rule: Callable[[np.ndarray], tuple] | None = None,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        self.value = _as_value(value)
        self.parents = parents
        self.backward_rule = backward_rule
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self):
        tag = self.name or ("leaf" if not self.parents else "op")
        return f"Node({tag}, shape={self.value.shape}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; scalars are wrapped as constants.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return _getitem(self, index)


def constant(value, name: str | None = None) -> Node:
    return Node(value, name=name)


def parameter(value, name: str | None = None) -> Node:
    return Node(value, requires_grad=True, name=name)


def _coerce(x) -> Node:
    if isinstance(x, Node):
        return x
    return Node(x)


def _make(value, parents: tuple[Node, ...], rule) -> Node:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Node(value)
    return Node(value, parents, rule, requires_grad=True)


def backward(root: Node) -> dict[Node, np.ndarray]:
    """Gradients of the scalar ``root`` w.r.t. every reachable grad-requiring node.

    Multiple uses of a node accumulate by addition.  Returns a table keyed
    by node identity; look up parameters directly.
    """
    if root.value.size != 1:
        raise ValueError(
            f"backward() requires a scalar root, got shape {root.value.shape}"
        )

    # Iterative post-order over the grad-requiring subgraph.
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[Node, np.ndarray] = {root: np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.get(node)
        if g is None or node.backward_rule is None:
            continue
        parent_grads = node.backward_rule(g)
        for p, pg in zip(node.parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if p in grads:
                grads[p] = grads[p] + pg
            else:
                grads[p] = pg
    return grads


# ---------------------------------------------------------------------------
# elementwise ops


def _check_same_shape(a: Node, b: Node, op: str):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


def _wrap_scalar_pair(a, b):
    """Allow one plain Python scalar operand without an explicit broadcast."""
    if isinstance(a, Node) and np.isscalar(b):
        return a, constant(np.full(a.value.shape, float(b)))
    if isinstance(b, Node) and np.isscalar(a):
        return constant(np.full(b.value.shape, float(a))), b
    return _coerce(a), _coerce(b)


def add(a, b) -> Node:
    a, b = _wrap_scalar_pair(a, b)
    _check_same_shape(a, b, "add")
    return _make(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b) -> Node:
    a, b = _wrap_scalar_pair(a, b)
    _check_same_shape(a, b, "sub")
    return _make(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b) -> Node:
    a, b = _wrap_scalar_pair(a, b)
    _check_same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return _make(av * bv, (a, b), lambda g: (g * bv, g * av))


def neg(a) -> Node:
    a = _coerce(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function on a raw array."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def silu(x) -> Node:
    x = _coerce(x)
    s = sigmoid_array(x.value)
    xv = x.value

    def rule(g):
        return (g * s * (1.0 + xv * (1.0 - s)),)

    return _make(xv * s, (x,), rule)


def relu(x) -> Node:
    x = _coerce(x)
    mask = x.value > 0

    def rule(g):
        return (g * mask,)

    return _make(np.where(mask, x.value, 0.0), (x,), rule)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Node:
    """Contract the trailing axis of ``a`` ([.., p]) with 2-D ``b`` ([p, q])."""
    a, b = _coerce(a), _coerce(b)
    av, bv = a.value, b.value
    if bv.ndim != 2 or av.ndim < 1 or av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"matmul: shapes {av.shape} and {bv.shape} do not chain")

    def rule(g):
        ga = g @ bv.T
        g2 = g.reshape(-1, bv.shape[1])
        a2 = av.reshape(-1, bv.shape[0])
        return ga, a2.T @ g2

    return _make(av @ bv, (a, b), rule)


# ---------------------------------------------------------------------------
# reductions and shape ops


def reduce_sum(x, axis: int | None = None) -> Node:
    x = _coerce(x)
    xv = x.value

    if axis is None:
        value = xv.sum()

        def rule(g):
            return (np.full_like(xv, float(g)),)

    else:
        value = xv.sum(axis=axis)

        def rule(g):
            return (np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy(),)

    return _make(value, (x,), rule)


def mean(x, axis: int | None = None) -> Node:
    x = _coerce(x)
    n = x.value.size if axis is None else x.value.shape[axis]
    return mul(reduce_sum(x, axis), 1.0 / n)


def reshape(x, shape: Sequence[int]) -> Node:
    x = _coerce(x)
    old = x.value.shape
    value = x.value.reshape(shape)

    def rule(g):
        return (g.reshape(old),)

    return _make(value, (x,), rule)


def transpose(x, axes: Sequence[int]) -> Node:
    x = _coerce(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def rule(g):
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return _make(np.ascontiguousarray(x.value.transpose(axes)), (x,), rule)


def broadcast_to(x, shape: Sequence[int]) -> Node:
    """Expand extent-1 axes and/or prepend leading axes; backward sums them."""
    x = _coerce(x)
    shape = tuple(int(s) for s in shape)
    src = x.value.shape
    lead = len(shape) - len(src)
    if lead < 0:
        raise ShapeError(f"broadcast: cannot shrink {src} to {shape}")
    expanded = []
    for i, (s, t) in enumerate(zip(src, shape[lead:])):
        if s == t:
            continue
        if s == 1:
            expanded.append(lead + i)
        else:
            raise ShapeError(f"broadcast: axis {i} of {src} incompatible with {shape}")
    lead_axes = tuple(range(lead))
    expanded = tuple(expanded)

    def rule(g):
        if lead_axes:
            g = g.sum(axis=lead_axes)
        for ax in expanded:
            g = g.sum(axis=ax - lead, keepdims=True)
        return (g,)

    return _make(np.broadcast_to(x.value, shape).copy(), (x,), rule)


def concat(nodes: Sequence[Node], axis: int) -> Node:
    nodes = [_coerce(n) for n in nodes]
    if not nodes:
        raise ValueError("concat: need at least one operand")
    sizes = [n.value.shape[axis] for n in nodes]
    bounds = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, bounds, axis=axis))

    return _make(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes), rule)


def _getitem(x: Node, index) -> Node:
    xv = x.value
    # asarray, not ascontiguousarray: the latter promotes 0-d results to 1-d.
    value = np.asarray(xv[index])

    def rule(g):
        full = np.zeros_like(xv)
        full[index] = g
        return (full,)

    return _make(value, (x,), rule)
