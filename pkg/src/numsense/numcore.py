"""Dense float64 matrices with reverse-mode gradients.

Every value is a 2-D ``numpy.ndarray`` (row-major, float64). A computation
is a graph of :class:`DiffNode` objects built with :func:`build_op` (or the
thin wrappers below); :func:`backward` propagates d(root)/d(node) into each
node's ``grad``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DomainError,
    NonDeterministicBuilderError,
    NonFiniteError,
    NonScalarRootError,
    ShapeMismatchError,
)

ZERO_ROW_NORM = 1e-30

OP_KINDS = (
    "matmul",
    "add",
    "mul",
    "scale",
    "exp",
    "log",
    "neg",
    "sum",
    "mean",
    "row_softmax",
    "l2_normalize_rows",
    "tanh",
    "relu",
    "transpose",
    "row_select",
)


def as_matrix(x) -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array (scalars become 1x1, vectors 1xN)."""
    a = np.array(x, dtype=np.float64, order="C", copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D matrix, got {a.ndim} dimensions")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf")
    return a


class DiffNode:
    """A node in a differentiable graph.

    ``value`` is the forward result and ``grad`` the accumulated gradient of
    the most recent :func:`backward` root with respect to it.
    """

    __slots__ = ("value", "_grad", "op", "parents", "attrs", "requires_grad")

    def __init__(self, value, op="leaf", parents=(), attrs=None, requires_grad=True):
        self.value = value
        self._grad = None
        self.op = op
        self.parents = tuple(parents)
        self.attrs = attrs or {}
        self.requires_grad = requires_grad

    @property
    def grad(self) -> np.ndarray:
        return np.zeros_like(self.value) if self._grad is None else self._grad

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise NonScalarRootError(f"item() on a {self.value.shape} node")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"DiffNode(op={self.op!r}, shape={self.shape})"

    # operator sugar; all of it routes through build_op
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(other))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    @property
    def T(self):
        return transpose(self)


def leaf(x) -> DiffNode:
    """A trainable input node."""
    return DiffNode(as_matrix(x))


def constant(x) -> DiffNode:
    """An input node that never receives a gradient."""
    return DiffNode(as_matrix(x), op="constant", requires_grad=False)


def as_node(x) -> DiffNode:
    return x if isinstance(x, DiffNode) else constant(x)


# ---------------------------------------------------------------------------
# forward / backward rules


def _same_shape(kind, a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{kind}: shapes {a.shape} and {b.shape} differ")


def _reduce_axis(attrs):
    axis = attrs.get("axis")
    if axis not in (None, 0, 1):
        raise ShapeMismatchError(f"reduction axis must be None, 0 or 1, got {axis!r}")
    return axis


def _fwd_matmul(vals, attrs):
    a, b = vals
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: {a.shape} @ {b.shape}")
    return a @ b


def _bwd_matmul(g, vals, out, attrs, needs):
    a, b = vals
    return (g @ b.T if needs[0] else None, a.T @ g if needs[1] else None)


def _fwd_add(vals, attrs):
    _same_shape("add", *vals)
    return vals[0] + vals[1]


def _fwd_mul(vals, attrs):
    _same_shape("mul", *vals)
    return vals[0] * vals[1]


def _fwd_log(vals, attrs):
    (a,) = vals
    if np.any(a <= 0.0):
        raise DomainError("log of a non-positive value")
    return np.log(a)


def _fwd_sum(vals, attrs):
    axis = _reduce_axis(attrs)
    if axis is None:
        return np.array([[vals[0].sum()]])
    return vals[0].sum(axis=axis, keepdims=True)


def _fwd_mean(vals, attrs):
    axis = _reduce_axis(attrs)
    if axis is None:
        return np.array([[vals[0].mean()]])
    return vals[0].mean(axis=axis, keepdims=True)


def _bwd_sum(g, vals, out, attrs, needs):
    return (np.broadcast_to(g, vals[0].shape).copy(),)


def _bwd_mean(g, vals, out, attrs, needs):
    shape = vals[0].shape
    axis = attrs.get("axis")
    count = shape[0] * shape[1] if axis is None else shape[axis]
    return (np.broadcast_to(g, shape) / count,)


def _fwd_softmax(vals, attrs):
    (a,) = vals
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _bwd_softmax(g, vals, out, attrs, needs):
    return (out * (g - (g * out).sum(axis=1, keepdims=True)),)


def _fwd_normalize(vals, attrs):
    (a,) = vals
    norms = np.sqrt((a * a).sum(axis=1, keepdims=True))
    if np.any(norms < ZERO_ROW_NORM):
        rows = np.flatnonzero(norms[:, 0] < ZERO_ROW_NORM).tolist()
        raise DomainError(f"l2_normalize_rows: zero-norm row(s) {rows}")
    return a / norms


def _bwd_normalize(g, vals, out, attrs, needs):
    (a,) = vals
    norms = np.sqrt((a * a).sum(axis=1, keepdims=True))
    return ((g - out * (g * out).sum(axis=1, keepdims=True)) / norms,)


def _fwd_row_select(vals, attrs):
    (a,) = vals
    idx = attrs["indices"]
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeMismatchError(f"row_select: index out of range for {a.shape[0]} rows")
    return a[idx]


def _bwd_row_select(g, vals, out, attrs, needs):
    ga = np.zeros_like(vals[0])
    np.add.at(ga, attrs["indices"], g)
    return (ga,)


_RULES: dict[str, tuple[int, Callable, Callable]] = {
    "matmul": (2, _fwd_matmul, _bwd_matmul),
    "add": (2, _fwd_add, lambda g, v, o, at, n: (g, g)),
    "mul": (2, _fwd_mul, lambda g, v, o, at, n: (g * v[1], g * v[0])),
    "scale": (1, lambda v, at: v[0] * at["factor"], lambda g, v, o, at, n: (g * at["factor"],)),
    "exp": (1, lambda v, at: np.exp(v[0]), lambda g, v, o, at, n: (g * o,)),
    "log": (1, _fwd_log, lambda g, v, o, at, n: (g / v[0],)),
    "neg": (1, lambda v, at: -v[0], lambda g, v, o, at, n: (-g,)),
    "sum": (1, _fwd_sum, _bwd_sum),
    "mean": (1, _fwd_mean, _bwd_mean),
    "row_softmax": (1, _fwd_softmax, _bwd_softmax),
    "l2_normalize_rows": (1, _fwd_normalize, _bwd_normalize),
    "tanh": (1, lambda v, at: np.tanh(v[0]), lambda g, v, o, at, n: (g * (1.0 - o * o),)),
    "relu": (1, lambda v, at: np.maximum(v[0], 0.0), lambda g, v, o, at, n: (g * (v[0] > 0.0),)),
    "transpose": (1, lambda v, at: np.ascontiguousarray(v[0].T), lambda g, v, o, at, n: (g.T,)),
    "row_select": (1, _fwd_row_select, _bwd_row_select),
}


def build_op(kind: str, inputs: Sequence, **attrs) -> DiffNode:
    """Apply operation ``kind`` to ``inputs`` and return the result node.

    ``scale`` takes ``factor=``; ``sum``/``mean`` take ``axis=`` (None for a
    1x1 total, 1 for row sums, 0 for column sums); ``row_select`` takes
    ``indices=``.
    """
    if kind not in _RULES:
        raise ValueError(f"unknown op kind {kind!r}")
    arity, fwd, _ = _RULES[kind]
    nodes = tuple(as_node(x) for x in inputs)
    if len(nodes) != arity:
        raise ValueError(f"{kind} takes {arity} input(s), got {len(nodes)}")
    if kind == "scale":
        attrs["factor"] = float(attrs["factor"])
    if kind == "row_select":
        attrs["indices"] = np.asarray(attrs["indices"], dtype=np.intp).reshape(-1)
    # overflow is reported below as NonFiniteError, so silence numpy's warning
    with np.errstate(over="ignore", invalid="ignore"):
        out = fwd([n.value for n in nodes], attrs)
    if not np.isfinite(out).all():
        raise NonFiniteError(f"{kind} produced a non-finite value")
    return DiffNode(out, kind, nodes, attrs, any(n.requires_grad for n in nodes))


def matmul(a, b):
    return build_op("matmul", (a, b))


def add(a, b):
    return build_op("add", (a, b))


def mul(a, b):
    return build_op("mul", (a, b))


def scale(a, factor: float):
    return build_op("scale", (a,), factor=factor)


def exp(a):
    return build_op("exp", (a,))


def log(a):
    return build_op("log", (a,))


def neg(a):
    return build_op("neg", (a,))


def sum_(a, axis=None):
    return build_op("sum", (a,), axis=axis)


def mean(a, axis=None):
    return build_op("mean", (a,), axis=axis)


def row_softmax(a):
    return build_op("row_softmax", (a,))


def l2_normalize_rows(a):
    """Scale each row to unit Euclidean norm; rows with norm < 1e-30 raise DomainError."""
    return build_op("l2_normalize_rows", (a,))


def tanh(a):
    return build_op("tanh", (a,))


def relu(a):
    return build_op("relu", (a,))


def transpose(a):
    return build_op("transpose", (a,))


def row_select(a, indices):
    return build_op("row_select", (a,), indices=indices)


def abs_(a):
    # relu(x) + relu(-x); subgradient 0 at x == 0
    a = as_node(a)
    return add(relu(a), relu(neg(a)))


# ---------------------------------------------------------------------------
# backward


def _topological(root: DiffNode) -> list[DiffNode]:
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: DiffNode) -> None:
    """Fill ``grad`` on every node reachable from the 1x1 ``root``.

    Gradients are reset before propagation, so calling this twice on the same
    graph gives the same result rather than doubling it.
    """
    if root.value.shape != (1, 1):
        raise NonScalarRootError(f"backward needs a 1x1 root, got {root.value.shape}")
    order = _topological(root)
    for node in order:
        node._grad = None
    root._grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._grad is None or not node.parents or not node.requires_grad:
            continue
        needs = tuple(p.requires_grad for p in node.parents)
        grads = _RULES[node.op][2](
            node._grad, [p.value for p in node.parents], node.value, node.attrs, needs
        )
        for p, g, need in zip(node.parents, grads, needs):
            if need and g is not None:
                p._grad = g if p._grad is None else p._grad + g


# ---------------------------------------------------------------------------
# finite-difference checking


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_coordinate: tuple[int, int, int]  # (parameter index, row, col)
    passed: bool
    tolerance: float


def relative_error(a, b, floor: float = 1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check(
    builder: Callable[..., DiffNode],
    params: Sequence,
    tolerance: float = 1e-5,
    step: float = 1e-6,
) -> GradCheckReport:
    """Compare backward gradients of ``builder(*leaves)`` with central differences.

    ``builder`` receives one leaf node per entry of ``params`` and must return
    a 1x1 node. Every coordinate of every parameter is perturbed by ``+-step``.
    """
    if tolerance <= 0 or step <= 0:
        raise ValueError("tolerance and step must be positive")
    base = [as_matrix(p) for p in params]

    def evaluate(values):
        return builder(*[leaf(v) for v in values])

    leaves = [leaf(v) for v in base]
    root = builder(*leaves)
    again = evaluate(base)
    if not np.array_equal(root.value, again.value):
        raise NonDeterministicBuilderError("two forward passes on the same input disagree")
    backward(root)

    worst, worst_at = 0.0, (0, 0, 0)
    for k, v in enumerate(base):
        analytic = leaves[k].grad
        for r in range(v.shape[0]):
            for c in range(v.shape[1]):
                plus = [x.copy() for x in base]
                minus = [x.copy() for x in base]
                plus[k][r, c] += step
                minus[k][r, c] -= step
                numeric = (evaluate(plus).item() - evaluate(minus).item()) / (2.0 * step)
                err = float(relative_error(analytic[r, c], numeric))
                if err > worst:
                    worst, worst_at = err, (k, r, c)
    return GradCheckReport(worst, worst_at, worst < tolerance, tolerance)
