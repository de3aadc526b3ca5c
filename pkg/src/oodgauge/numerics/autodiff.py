"""Minimal reverse-mode autodiff over a closed set of array primitives.

Every primitive accepts either plain ``np.ndarray``/float operands or
:class:`Var` operands. With no ``Var`` among the inputs the primitive is a
plain numpy computation, so model code runs tape-free at evaluation time.
With at least one ``Var`` a node is appended to that variable's tape.

Anything outside the primitive set (numpy ufuncs, ``math`` functions,
``abs``...) applied to a ``Var`` raises :class:`UnsupportedPrimitive` as
soon as it is called, before any value is produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

PRIMITIVES = frozenset(
    {
        "leaf", "add", "sub", "mul", "div", "neg", "pow", "matmul",
        "relu", "exp", "log", "tanh", "sigmoid", "softplus",
        "sum", "mean", "l2norm", "logsumexp", "stop_gradient",
        "take_rows", "concat", "reshape", "transpose",
    }
)


class UnsupportedPrimitive(TypeError):
    pass


class NonScalarOutput(ValueError):
    pass


@dataclass
class Node:
    op: str
    parents: tuple[int, ...]
    value: np.ndarray
    backward: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None


class Tape:
    """Ordered record of primitive applications.

    Parents of node ``i`` always have index ``< i``; :meth:`backward` walks
    the nodes once in reverse.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def _push(self, op, parents, value, backward) -> "Var":
        if op not in PRIMITIVES:
            raise UnsupportedPrimitive(op)
        idx = len(self.nodes)
        assert all(p < idx for p in parents)
        self.nodes.append(Node(op, tuple(parents), value, backward))
        return Var(self, idx, value)

    def leaf(self, value) -> "Var":
        return self._push("leaf", (), np.array(value, dtype=np.float64), None)

    def backward(self, out: "Var") -> list[np.ndarray | None]:
        if out.tape is not self:
            raise ValueError("output does not belong to this tape")
        if out.value.size != 1:
            raise NonScalarOutput(f"output has shape {out.value.shape}, expected a scalar")
        adj: list[np.ndarray | None] = [None] * len(self.nodes)
        adj[out.index] = np.ones_like(out.value)
        self.visits = 0
        for i in range(out.index, -1, -1):
            node = self.nodes[i]
            g = adj[i]
            self.visits += 1
            if g is None or node.backward is None:
                continue
            for p, gp in zip(node.parents, node.backward(g)):
                if gp is None:
                    continue
                adj[p] = gp if adj[p] is None else adj[p] + gp
        return adj


class Var:
    __slots__ = ("tape", "index", "value")
    __array_priority__ = 1000

    def __init__(self, tape: Tape, index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        return transpose(self)

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        # ndarray/np.float64 on the left of an operator lands here
        op = _UFUNC_OPS.get(ufunc.__name__)
        if op is None or method != "__call__" or kwargs:
            raise UnsupportedPrimitive(f"numpy ufunc {ufunc.__name__!r} is not a tape primitive")
        return op(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        raise UnsupportedPrimitive(f"numpy function {func.__name__!r} is not a tape primitive")

    def __float__(self):
        raise UnsupportedPrimitive("float() on a traced value; use .value")

    def __abs__(self):
        raise UnsupportedPrimitive("abs")

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"


def _val(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape | None:
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is not None and x.tape is not tape:
                raise ValueError("operands come from different tapes")
            tape = x.tape
    return tape


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _record(op, operands, value, backward):
    tape = _tape_of(*operands)
    if tape is None:
        return value
    parents = [x.index for x in operands if isinstance(x, Var)]
    is_var = [isinstance(x, Var) for x in operands]

    def bw(g):
        grads = backward(g)
        return tuple(gi for gi, v in zip(grads, is_var) if v)

    return tape._push(op, parents, np.asarray(value, dtype=np.float64), bw)


def _shape(x):
    return np.shape(_val(x))


# elementwise binary


def add(a, b):
    av, bv = _val(a), _val(b)
    sa, sb = _shape(a), _shape(b)
    return _record("add", (a, b), av + bv,
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    av, bv = _val(a), _val(b)
    sa, sb = _shape(a), _shape(b)
    return _record("sub", (a, b), av - bv,
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    av, bv = _val(a), _val(b)
    sa, sb = _shape(a), _shape(b)
    return _record("mul", (a, b), av * bv,
                   lambda g: (_unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)))


def div(a, b):
    av, bv = _val(a), _val(b)
    sa, sb = _shape(a), _shape(b)
    out = av / bv
    return _record("div", (a, b), out,
                   lambda g: (_unbroadcast(g / bv, sa), _unbroadcast(-g * out / bv, sb)))


def neg(a):
    return _record("neg", (a,), -_val(a), lambda g: (-g,))


def power(a, p: float):
    if isinstance(p, Var):
        raise UnsupportedPrimitive("pow with a traced exponent")
    av = _val(a)
    return _record("pow", (a,), av ** p, lambda g: (g * p * av ** (p - 1),))


def matmul(a, b):
    av, bv = np.asarray(_val(a)), np.asarray(_val(b))

    def bw(g):
        a2 = av if av.ndim > 1 else av[None, :]
        b2 = bv if bv.ndim > 1 else bv[:, None]
        g2 = np.reshape(g, a2.shape[:-1] + b2.shape[-1:])
        ga = g2 @ np.swapaxes(b2, -1, -2)
        gb = np.swapaxes(a2, -1, -2) @ g2
        return ga.reshape(av.shape), gb.reshape(bv.shape)

    return _record("matmul", (a, b), av @ bv, bw)


# elementwise unary


def relu(a):
    av = _val(a)
    mask = av > 0
    return _record("relu", (a,), np.where(mask, av, 0.0), lambda g: (g * mask,))


def exp(a):
    out = np.exp(_val(a))
    return _record("exp", (a,), out, lambda g: (g * out,))


def log(a):
    av = _val(a)
    return _record("log", (a,), np.log(av), lambda g: (g / av,))


def tanh(a):
    out = np.tanh(_val(a))
    return _record("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def _sigmoid_np(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus_np(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(a):
    out = _sigmoid_np(_val(a))
    return _record("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def softplus(a):
    """log(1 + e^x), evaluated without overflow or cancellation."""
    av = _val(a)
    return _record("softplus", (a,), _softplus_np(av), lambda g: (g * _sigmoid_np(av),))


# reductions


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False):  # noqa: A001
    av = _val(a)
    shape = av.shape
    return _record("sum", (a,), np.sum(av, axis=axis, keepdims=keepdims),
                   lambda g: (_expand(g, shape, axis, keepdims).copy(),))


def mean(a, axis=None, keepdims=False):
    av = _val(a)
    shape = av.shape
    n = av.size if axis is None else av.shape[axis]
    return _record("mean", (a,), np.mean(av, axis=axis, keepdims=keepdims),
                   lambda g: (_expand(g, shape, axis, keepdims) / n,))


def l2norm(a, axis=-1, keepdims=False):
    """Euclidean norm along ``axis``. The gradient at a zero vector is taken as 0."""
    av = _val(a)
    out = np.sqrt(np.sum(av * av, axis=axis, keepdims=keepdims))

    def bw(g):
        o = out if keepdims else np.expand_dims(out, axis)
        gg = g if keepdims else np.expand_dims(g, axis)
        safe = np.where(o > 0, o, 1.0)
        return (np.where(o > 0, gg * av / safe, 0.0),)

    return _record("l2norm", (a,), out, bw)


def logsumexp(a, axis=-1, keepdims=False):
    av = _val(a)
    m = np.max(av, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.log(np.sum(np.exp(av - m), axis=axis, keepdims=True)) + m
    out = s if keepdims else np.squeeze(s, axis=axis)
    return _record("logsumexp", (a,), out,
                   lambda g: ((g if keepdims else np.expand_dims(g, axis)) * np.exp(av - s),))


# structural


def stop_gradient(a):
    """Identity forward, zero backward."""
    return _record("stop_gradient", (a,), np.array(_val(a), copy=True), lambda g: (None,))


def take_rows(a, idx):
    """``out[i] = a[i, idx[i]]`` for a 2-D ``a``."""
    av = _val(a)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(av.shape[0])

    def bw(g):
        ga = np.zeros_like(av)
        np.add.at(ga, (rows, idx), g)
        return (ga,)

    return _record("take_rows", (a,), av[rows, idx], bw)


def concat(parts: Sequence, axis=0):
    vals = [np.asarray(_val(p), dtype=np.float64) for p in parts]
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return _record("concat", tuple(parts), np.concatenate(vals, axis=axis),
                   lambda g: tuple(np.split(g, bounds, axis=axis)))


def reshape(a, shape):
    av = _val(a)
    old = av.shape
    return _record("reshape", (a,), np.reshape(av, shape), lambda g: (np.reshape(g, old),))


def transpose(a):
    return _record("transpose", (a,), np.swapaxes(_val(a), -1, -2),
                   lambda g: (np.swapaxes(g, -1, -2),))


_UFUNC_OPS = {
    "add": add, "subtract": sub, "multiply": mul, "true_divide": div,
    "divide": div, "negative": neg, "matmul": matmul,
}


# drivers


def value_and_grad(f: Callable, *inputs, **kwargs):
    """Evaluate scalar ``f(*inputs, **kwargs)`` and its gradient w.r.t. each input."""
    tape = Tape()
    leaves = [tape.leaf(x) for x in inputs]
    out = f(*leaves, **kwargs)
    if not isinstance(out, Var):
        # f did not touch its inputs: constant output
        val = np.asarray(out, dtype=np.float64)
        if val.size != 1:
            raise NonScalarOutput(f"output has shape {val.shape}, expected a scalar")
        return float(val.reshape(())), [np.zeros_like(leaf.value) for leaf in leaves]
    adj = tape.backward(out)
    grads = [np.zeros_like(leaf.value) if adj[leaf.index] is None else adj[leaf.index]
             for leaf in leaves]
    return float(out.value.reshape(())), grads


def grad(f: Callable, *inputs, **kwargs) -> list[np.ndarray]:
    return value_and_grad(f, *inputs, **kwargs)[1]


def finite_diff(f: Callable, *inputs, h: float = 1e-5, **kwargs) -> list[np.ndarray]:
    """Central-difference gradient of scalar ``f``; independent of the tape."""
    if h <= 0:
        raise ValueError("h must be positive")
    xs = [np.array(x, dtype=np.float64) for x in inputs]

    def call():
        return float(np.asarray(f(*xs, **kwargs), dtype=np.float64).reshape(()))

    out = []
    for x in xs:
        g = np.zeros_like(x)
        flat = x.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = call()
            flat[i] = orig - h
            fm = call()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out
