"""Reverse-mode autodiff over dense float64 arrays.

Every vector/matrix in the model (node states, attention vectors, decoder
state, coverage, ...) lives in a :class:`Tensor`. Forward ops build an
acyclic graph; :func:`backward` walks it once in reverse topological order.
No broadcasting: shapes must match exactly except where an op states
otherwise. Numeric inner loops are delegated to the active kernel backend.
"""

from __future__ import annotations

import numpy as np

from .._kernels import kern

LOG_EPS = 1e-12


class Tensor:
    """A float64 array plus its gradient and backprop closure.

    The gradient array starts at zero; it is allocated on first touch so
    forward-only passes stay cheap.
    """

    __slots__ = ("data", "_grad", "op", "parents", "_bw")

    def __init__(self, data, op: str = "leaf", parents: tuple = ()):
        self.data = np.asarray(data, dtype=np.float64)
        self._grad = None
        self.op = op
        self.parents = parents
        self._bw = None

    @property
    def grad(self) -> np.ndarray:
        g = self._grad
        if g is None:
            g = self._grad = np.zeros_like(self.data)
        return g

    @grad.setter
    def grad(self, value):
        self._grad = value

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        if self._grad is not None:
            self._grad[...] = 0.0

    def item(self) -> float:
        return float(self.data)

    # sugar; the named functions below do the work
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        if not isinstance(key, slice):
            raise TypeError("Tensor indexing supports 1-D slices only")
        start, stop, step = key.indices(self.data.shape[0])
        if step != 1:
            raise ValueError("Tensor slicing requires step 1")
        return slice_axis(self, start, stop, axis=0)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor(a.data + b.data, "add", (a, b))

    def bw():
        a.grad += out.grad
        b.grad += out.grad

    out._bw = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; one operand may be a one-element scalar tensor."""
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise ValueError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data, "mul", (a, b))

    def bw():
        ga = b.data * out.grad
        gb = a.data * out.grad
        a.grad += ga if a.data.shape == out.grad.shape else ga.sum().reshape(a.data.shape)
        b.grad += gb if b.data.shape == out.grad.shape else gb.sum().reshape(b.data.shape)

    out._bw = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python float constant."""
    c = float(c)
    out = Tensor(a.data * c, "scale", (a,))

    def bw():
        a.grad += c * out.grad

    out._bw = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """np.dot semantics for 1-D/2-D operands; no batching, no broadcasting."""
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ValueError(f"matmul: operands must be 1-D or 2-D, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, "matmul", (a, b))

    def bw():
        gy = out.grad
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 2:
            a.grad += gy @ bd.T
            b.grad += ad.T @ gy
        elif ad.ndim == 2 and bd.ndim == 1:
            a.grad += np.outer(gy, bd)
            b.grad += ad.T @ gy
        elif ad.ndim == 1 and bd.ndim == 2:
            a.grad += bd @ gy
            b.grad += np.outer(ad, gy)
        else:  # vector . vector -> scalar
            a.grad += gy * bd
            b.grad += gy * ad

    out._bw = bw
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T.copy(), "transpose", (a,))

    def bw():
        a.grad += out.grad.T

    out._bw = bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape).copy(), "reshape", (a,))

    def bw():
        a.grad += out.grad.reshape(a.data.shape)

    out._bw = bw
    return out


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), "concat", tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def bw():
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(offset, offset + size)
            p.grad += out.grad[tuple(sl)]
            offset += size

    out._bw = bw
    return out


def slice_axis(a: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out = Tensor(a.data[sl].copy(), "slice", (a,))

    def bw():
        a.grad[sl] += out.grad

    out._bw = bw
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), "sum", (a,))

    def bw():
        a.grad += out.grad

    out._bw = bw
    return out


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = Tensor(a.data.sum(axis=axis), "sum_axis", (a,))

    def bw():
        a.grad += np.expand_dims(out.grad, axis)

    out._bw = bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(kern.sigmoid(a.data), "sigmoid", (a,))

    def bw():
        kern.sigmoid_bwd(out.data, out.grad, a.grad)

    out._bw = bw
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(kern.tanh(a.data), "tanh", (a,))

    def bw():
        kern.tanh_bwd(out.data, out.grad, a.grad)

    out._bw = bw
    return out


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out = Tensor(kern.leaky_relu(a.data, slope), "leaky_relu", (a,))

    def bw():
        kern.leaky_relu_bwd(a.data, slope, out.grad, a.grad)

    out._bw = bw
    return out


def exp(a: Tensor) -> Tensor:
    out = Tensor(kern.exp(a.data), "exp", (a,))

    def bw():
        kern.exp_bwd(out.data, out.grad, a.grad)

    out._bw = bw
    return out


def log(a: Tensor, eps: float = LOG_EPS) -> Tensor:
    """Natural log, clamped below at eps so log stays finite at zero."""
    out = Tensor(kern.log_guarded(a.data, eps), "log", (a,))

    def bw():
        kern.log_guarded_bwd(a.data, eps, out.grad, a.grad)

    out._bw = bw
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; the subgradient follows the smaller argument, ties -> a."""
    _same_shape(a, b, "minimum")
    out = Tensor(kern.minimum(a.data, b.data), "minimum", (a, b))

    def bw():
        kern.minimum_bwd(a.data, b.data, out.grad, a.grad, b.grad)

    out._bw = bw
    return out


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over ``axis``; entries where ``mask`` == 0 come out exactly 0.

    Raises if any row of the masked input has no valid entry.
    """
    nd = a.data.ndim
    if nd not in (1, 2):
        raise ValueError(f"softmax: input must be 1-D or 2-D, got {a.data.shape}")
    if axis < 0:
        axis += nd
    if axis not in (0, nd - 1):
        raise ValueError(f"softmax: invalid axis {axis} for shape {a.data.shape}")
    flip = nd == 2 and axis == 0

    x = a.data
    m = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64)
        if m.shape != x.shape:
            raise ValueError(f"softmax: mask shape {m.shape} does not match input {x.shape}")
    if flip:
        x = np.ascontiguousarray(x.T)
        m = np.ascontiguousarray(m.T) if m is not None else None
    rows = x.reshape(1, -1) if nd == 1 else x
    mrows = m.reshape(1, -1) if (m is not None and nd == 1) else m

    y = kern.softmax_rows(np.ascontiguousarray(rows), mrows)
    ydata = y.reshape(a.data.shape[::-1] if flip else a.data.shape)
    if flip:
        ydata = ydata.T.copy()
    out = Tensor(ydata, "softmax", (a,))

    def bw():
        yy = out.data.T if flip else out.data
        gg = out.grad.T if flip else out.grad
        yy2 = yy.reshape(1, -1) if nd == 1 else yy
        gg2 = gg.reshape(1, -1) if nd == 1 else gg
        gx = np.zeros_like(yy2)
        kern.softmax_rows_bwd(np.ascontiguousarray(yy2), np.ascontiguousarray(gg2), gx)
        gx = gx.reshape(yy.shape)
        a.grad += gx.T if flip else gx.reshape(a.data.shape)

    out._bw = bw
    return out


def embed_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table by integer ids."""
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[ids], "embed_rows", (table,))

    def bw():
        np.add.at(table.grad, ids, out.grad)

    out._bw = bw
    return out


def scatter_add(values: Tensor, ids: np.ndarray, size: int) -> Tensor:
    """Sum 1-D values into a zero vector of length ``size`` at positions ``ids``."""
    ids = np.asarray(ids, dtype=np.int64)
    data = np.zeros(size, dtype=np.float64)
    np.add.at(data, ids, values.data)
    out = Tensor(data, "scatter_add", (values,))

    def bw():
        values.grad += out.grad[ids]

    out._bw = bw
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` of every tensor reachable from ``loss``.

    Repeated calls accumulate; zero grads between steps. The traversal is
    iterative, so graph depth is not limited by the recursion limit.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._bw is not None:
            node._bw()
