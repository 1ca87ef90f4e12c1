"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation in the model is built from the primitives
here. Tensors wrap a numpy array; non-leaf tensors remember their parents
and a backward closure, and ``Tensor.backward()`` replays the recorded
operations in reverse topological order (see :class:`Tape`).

Tensors are treated as immutable values once created: forward code never
mutates ``.data`` in place, which keeps frozen models safe to share across
threads. Gradient accumulation during ``backward`` is the one sanctioned
mutation and is confined to the training thread.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Optional, Sequence, Union

import numpy as np

DTYPE = np.float64

Arrayish = Union["Tensor", np.ndarray, float, int, Sequence]


class ShapeError(ValueError):
    """Raised when operand shapes do not satisfy an operation's contract."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (cheap inference passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-dimensional float64 array with optional gradient tracking.

    ``grad`` is populated lazily by :meth:`backward`; it always has the
    same shape as ``data`` when present.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data: Arrayish, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward = None
        self.op = ""

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag}, op={self.op or 'leaf'})"

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __getitem__(self, index):
        return take_slice(self, index)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def backward(self, params: Optional[Iterable] = None) -> None:
        """Reverse-mode pass from a scalar; see :func:`backward`."""
        backward(self, params=params)


class Tape:
    """Ordered record of the operations reachable from a root tensor.

    ``nodes`` lists tensors in a valid execution (topological) order, so
    replaying their backward closures over ``reversed(nodes)`` visits each
    recorded operation exactly once, children before parents.
    """

    def __init__(self, nodes: list):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: "Tensor") -> "Tape":
        order: list = []
        seen = set()
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
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor, params: Optional[Iterable] = None) -> None:
    """Populate ``grad`` for everything reachable from a scalar loss.

    When ``params`` is given, any parameter the loss does not reach gets an
    explicit zero gradient so optimizers see a full gradient vector.
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    tape = Tape.from_root(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        if node._backward is not None and node.grad is not None:
            node._backward()
    if params is not None:
        for p in params:
            t = p.tensor if hasattr(p, "tensor") else p
            if t.grad is None:
                t.grad = np.zeros_like(t.data)


# -- graph plumbing --------------------------------------------------------


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(value) -> Tensor:
    """A tensor that never tracks gradients (fixed inputs, masks, one-hots)."""
    return Tensor(value, requires_grad=False)


def _make(data: np.ndarray, parents: tuple, backward_fn, op: str) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents
        out._backward = backward_fn
        out.op = op
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over the axes numpy broadcast to reach ``g.shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def back(out_ref=None):
        g = out.grad
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    out = _make(data, (a, b), back, "add")
    return out


def neg(a: Tensor) -> Tensor:
    def back():
        _accum(a, -out.grad)

    out = _make(-a.data, (a,), back, "neg")
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def back():
        g = out.grad
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    out = _make(data, (a, b), back, "mul")
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data

    def back():
        g = out.grad
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    out = _make(data, (a, b), back, "div")
    return out


def power(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    data = a.data**p

    def back():
        _accum(a, out.grad * p * a.data ** (p - 1.0))

    out = _make(data, (a,), back, f"pow{p}")
    return out


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def back():
        _accum(a, out.grad * data)

    out = _make(data, (a,), back, "exp")
    return out


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def back():
        _accum(a, out.grad / a.data)

    out = _make(data, (a,), back, "log")
    return out


def clamp_min(a: Tensor, floor: float) -> Tensor:
    data = np.maximum(a.data, floor)

    def back():
        _accum(a, out.grad * (a.data > floor))

    out = _make(data, (a,), back, "clamp_min")
    return out


# -- activations -------------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def back():
        _accum(a, out.grad * (a.data > 0.0))

    out = _make(data, (a,), back, "relu")
    return out


def sigmoid(a: Tensor) -> Tensor:
    data = np.empty_like(a.data)
    pos = a.data >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    data[~pos] = ex / (1.0 + ex)

    def back():
        _accum(a, out.grad * data * (1.0 - data))

    out = _make(data, (a,), back, "sigmoid")
    return out


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def back():
        _accum(a, out.grad * (1.0 - data * data))

    out = _make(data, (a,), back, "tanh")
    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def back():
        g = out.grad
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - inner))

    out = _make(data, (a,), back, "softmax")
    return out


# -- reductions and reshapes --------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def back():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape).copy())

    out = _make(data, (a,), back, "sum")
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def back():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape) / count)

    out = _make(data, (a,), back, "mean")
    return out


def reshape(a: Tensor, shape: tuple) -> Tensor:
    data = a.data.reshape(shape)

    def back():
        _accum(a, out.grad.reshape(a.shape))

    out = _make(data, (a,), back, "reshape")
    return out


def transpose(a: Tensor, axes=None) -> Tensor:
    data = a.data.transpose(axes)

    def back():
        inv = None if axes is None else np.argsort(axes)
        _accum(a, out.grad.transpose(inv))

    out = _make(data, (a,), back, "transpose")
    return out


def take_slice(a: Tensor, index) -> Tensor:
    data = a.data[index]

    def back():
        g = np.zeros_like(a.data)
        g[index] += out.grad
        _accum(a, g)

    out = _make(data, (a,), back, "slice")
    return out


def take_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup)."""
    if table.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D table, got shape {table.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    data = table.data[idx]

    def back():
        g = np.zeros_like(table.data)
        np.add.at(g, idx, out.grad)
        _accum(table, g)

    out = _make(data, (table,), back, "take_rows")
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [(_wrap(t)) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one input")
    ref = list(tensors[0].shape)
    for i, t in enumerate(tensors[1:], start=1):
        s = list(t.shape)
        if len(s) != len(ref) or any(
            s[d] != ref[d] for d in range(len(ref)) if d != axis % len(ref)
        ):
            raise ShapeError(
                f"concat input {i} has shape {t.shape}, incompatible with "
                f"{tensors[0].shape} along axis {axis}"
            )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back():
        g = out.grad
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    out = _make(data, tuple(tensors), back, "concat")
    return out


# -- linear algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def back():
        g = out.grad
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out = _make(data, (a, b), back, "matmul")
    return out


def linear(x: Tensor, weight, bias=None) -> Tensor:
    """``x @ W + b`` with the bias broadcast over leading dimensions.

    ``x`` may be 1-D ``(d_in,)`` or 2-D ``(n, d_in)``; the weight is
    ``(d_in, d_out)`` and the optional bias ``(d_out,)``.
    """
    w = weight.tensor if hasattr(weight, "tensor") else weight
    b = None if bias is None else (bias.tensor if hasattr(bias, "tensor") else bias)
    if x.ndim not in (1, 2):
        raise ShapeError(f"linear expects 1-D or 2-D input, got shape {x.shape}")
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(
            f"linear input dim {x.shape[-1]} does not match weight {w.shape}"
        )
    squeeze = x.ndim == 1
    x2 = reshape(x, (1, x.shape[0])) if squeeze else x
    out = matmul(x2, w)
    if b is not None:
        out = add(out, b)
    if squeeze:
        out = reshape(out, (w.shape[1],))
    return out


# -- structured ops -----------------------------------------------------------


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean of a ``(D, H, W)`` map, kept as ``(D, 1, 1)``."""
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool expects a 3-D tensor, got {x.shape}")
    return mean(x, axis=(1, 2), keepdims=True)


def group_norm(x: Tensor, num_groups: int, gamma: Tensor, beta: Tensor,
               eps: float = 1e-5) -> Tensor:
    """Normalize a ``(D, H, W)`` map per channel group, then apply gamma/beta."""
    if x.ndim != 3:
        raise ShapeError(f"group_norm expects a 3-D tensor, got {x.shape}")
    d, h, w = x.shape
    if d % num_groups != 0:
        raise ShapeError(f"group_norm: {d} channels not divisible by {num_groups} groups")
    if eps <= 0:
        raise ValueError("group_norm eps must be positive")
    gamma = _wrap(gamma)
    beta = _wrap(beta)
    xg = reshape(x, (num_groups, (d // num_groups) * h * w))
    mu = mean(xg, axis=1, keepdims=True)
    centered = xg - mu
    var = mean(centered * centered, axis=1, keepdims=True)
    normed = div(centered, power(var + constant(eps), 0.5))
    normed = reshape(normed, (d, h, w))
    return normed * reshape(gamma, (d, 1, 1)) + reshape(beta, (d, 1, 1))


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Interleave channel groups: reshape ``(P, D/P)``, transpose, flatten."""
    if x.ndim != 3:
        raise ShapeError(f"channel_shuffle expects a 3-D tensor, got {x.shape}")
    d, h, w = x.shape
    if d % groups != 0:
        raise ShapeError(f"channel_shuffle: {d} channels not divisible by {groups} groups")
    out = reshape(x, (groups, d // groups, h, w))
    out = transpose(out, (1, 0, 2, 3))
    return reshape(out, (d, h, w))


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate ``(Cin, H, W)`` with kernels ``(Cout, Cin, k, k)``."""
    k = kernels.tensor if hasattr(kernels, "tensor") else kernels
    if x.ndim != 3 or k.ndim != 4:
        raise ShapeError(f"conv2d expects 3-D input and 4-D kernels, got {x.shape}, {k.shape}")
    cin, h, w = x.shape
    cout, kcin, kh, kw = k.shape
    if kcin != cin:
        raise ShapeError(f"conv2d channel mismatch: input {cin} vs kernels {kcin}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(
            f"conv2d output size {ho}x{wo} not positive for input {h}x{w}, "
            f"kernel {kh}x{kw}, stride {stride}, padding {padding}"
        )
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((cin, kh, kw, ho, wo), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i : i + stride * ho : stride, j : j + stride * wo : stride]
    cols2 = cols.reshape(cin * kh * kw, ho * wo)
    kmat = k.data.reshape(cout, cin * kh * kw)
    data = (kmat @ cols2).reshape(cout, ho, wo)

    def back():
        g = out.grad.reshape(cout, ho * wo)
        _accum(k, (g @ cols2.T).reshape(k.shape))
        dcols = (kmat.T @ g).reshape(cin, kh, kw, ho, wo)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, i, j]
        if padding:
            _accum(x, dxp[:, padding : padding + h, padding : padding + w])
        else:
            _accum(x, dxp)

    out = _make(data, (x, k), back, "conv2d")
    return out


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def back():
        _accum(x, out.grad * mask)

    out = _make(x.data * mask, (x,), back, "dropout")
    return out
