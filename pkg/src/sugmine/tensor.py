"""
Minimal reverse-mode automatic differentiation on top of numpy.

Only the operations needed by the LSTM encoder, the attention pooling, the
linear decoder and the weighted NLL loss are provided.  All values are
float64.  Binary operations require equal shapes; the only broadcasting
allowed is against a scalar (a Python number or a 0-d tensor).

Gradients accumulate into ``Tensor.grad`` of leaf tensors created with
``requires_grad=True`` and are only cleared by ``zero_grad``.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph construction in the current thread."""
    prev = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = None
        self._parents = ()
        self._backward = None

    @classmethod
    def _result(cls, data, parents, op, backward):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # operators
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("only division by a Python scalar is supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self) -> "Tensor":
        return tsum(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def backward(self):
        backward(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    return np.asarray(g.sum()) if shape == () and g.shape != () else g


def _check_binary(a: Tensor, b: Tensor, name: str):
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "add")

    def _bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._result(a.data + b.data, (a, b), "add", _bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "sub")

    def _bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._result(a.data - b.data, (a, b), "sub", _bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "mul")

    def _bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._result(a.data * b.data, (a, b), "mul", _bw)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def _bw(g):
        return (g * (1.0 - y * y),)

    return Tensor._result(y, (x,), "tanh", _bw)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def _bw(g):
        return (g * y * (1.0 - y),)

    return Tensor._result(y, (x,), "sigmoid", _bw)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def _bw(g):
        return (g * y,)

    return Tensor._result(y, (x,), "exp", _bw)


def log(x: Tensor) -> Tensor:
    def _bw(g):
        return (g / x.data,)

    return Tensor._result(np.log(x.data), (x,), "log", _bw)


_ELEMENTWISE = {"add": add, "sub": sub, "mul": mul, "tanh": tanh, "sigmoid": sigmoid}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch by name: add, sub, mul (binary) or tanh, sigmoid (unary)."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-D/1-D operands (vectors act as row/column as in numpy)."""
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ for {a.shape} @ {b.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    if a.ndim == 2 and b.ndim == 2:
        def _bw(g):
            return g @ bd.T, ad.T @ g
    elif a.ndim == 2:
        def _bw(g):
            return np.outer(g, bd), ad.T @ g
    elif b.ndim == 2:
        def _bw(g):
            return bd @ g, np.outer(ad, g)
    else:
        def _bw(g):
            return g * bd, g * ad

    return Tensor._result(out, (a, b), "matmul", _bw)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {x.shape}")

    def _bw(g):
        return (g.T,)

    return Tensor._result(x.data.T, (x,), "transpose", _bw)


def tsum(x: Tensor) -> Tensor:
    shape = x.shape

    def _bw(g):
        return (np.full(shape, float(g)),)

    return Tensor._result(np.asarray(x.data.sum()), (x,), "sum", _bw)


def getitem(x: Tensor, index) -> Tensor:
    """Basic (non-fancy) indexing: ints and slices."""
    out = x.data[index]
    if not isinstance(out, np.ndarray):
        out = np.asarray(out)
    shape = x.shape

    def _bw(g):
        z = np.zeros(shape)
        z[index] = g
        return (z,)

    return Tensor._result(out, (x,), "getitem", _bw)


def take_rows(x: Tensor, ids: Sequence[int], frozen_rows: Sequence[int] = ()) -> Tensor:
    """Gather rows of a matrix; gradient scatters back (repeats accumulate).

    Rows listed in ``frozen_rows`` never receive gradient.
    """
    if x.ndim != 2:
        raise DimensionError(f"take_rows expects a matrix, got shape {x.shape}")
    idx = np.asarray(ids, dtype=np.intp).reshape(-1)
    out = x.data[idx]
    shape = x.shape

    def _bw(g):
        z = np.zeros(shape)
        np.add.at(z, idx, g)
        for r in frozen_rows:
            z[r] = 0.0
        return (z,)

    return Tensor._result(out, (x,), "take_rows", _bw)


def _check_parts(parts, axis, name):
    if not parts:
        raise DimensionError(f"{name}: no tensors given")
    ref = parts[0].shape
    for p in parts[1:]:
        if len(p.shape) != len(ref) or any(
            s != r for i, (s, r) in enumerate(zip(p.shape, ref)) if i != axis % max(len(ref), 1)
        ):
            raise DimensionError(f"{name}: incompatible shapes {ref} and {p.shape} on axis {axis}")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    _check_parts(parts, axis, "concat")
    if len(parts) == 1:
        return parts[0]
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._result(out, parts, "concat", _bw)


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise DimensionError("stack: no tensors given")
    for p in parts[1:]:
        if p.shape != parts[0].shape:
            raise DimensionError(f"stack: shapes {parts[0].shape} and {p.shape} differ")
    out = np.stack([p.data for p in parts], axis=axis)

    def _bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._result(out, parts, "stack", _bw)


def _check_finite(x: Tensor, name: str):
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"{name}: non-finite input")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    _check_finite(x, "softmax")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def _bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor._result(s, (x,), "softmax", _bw)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    _check_finite(x, "log_softmax")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    y = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def _bw(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(y, (x,), "log_softmax", _bw)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)

    def _bw(g):
        return (g * mask,)

    return Tensor._result(x.data * mask, (x,), "dropout", _bw)


def _topo_order(root: Tensor) -> list:
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into ``grad`` of every tracked leaf."""
    if loss.shape != ():
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones(())}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            prev = grads.get(key)
            grads[key] = pg if prev is None else prev + pg


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3) -> float:
    """Compare autograd against central differences for scalar-valued ``f``.

    The numeric derivative Richardson-extrapolates the central differences
    at steps ``eps`` and ``eps/2`` (truncation error O(eps**4)), which keeps
    the step large enough for roundoff to stay negligible.

    ``x`` is perturbed in place (and restored), so ``f`` may ignore its
    argument and close over a model that owns ``x``.  Returns the maximum
    over elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    saved_grad, saved_flag = x.grad, x.requires_grad
    x.grad, x.requires_grad = None, True
    try:
        f(x).backward()
        analytic = np.zeros(x.shape) if x.grad is None else x.grad.copy()
        numeric = np.empty(x.shape)
        with no_grad():
            for idx in np.ndindex(*x.shape):
                orig = x.data[idx]

                def central(h):
                    x.data[idx] = orig + h
                    fp = f(x).item()
                    x.data[idx] = orig - h
                    fm = f(x).item()
                    return (fp - fm) / (2.0 * h)

                try:
                    numeric[idx] = (4.0 * central(eps / 2) - central(eps)) / 3.0
                finally:
                    x.data[idx] = orig
    finally:
        x.grad, x.requires_grad = saved_grad, saved_flag
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
