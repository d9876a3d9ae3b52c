"""Dense tensors with a reverse-mode tape.

Every differentiable operation returns a new :class:`Tensor` holding a
closure that pushes the output gradient back into its parents.  Calling
:meth:`Tensor.backward` on a scalar orders the graph topologically (the
computation record) and runs the closures in reverse.

Broadcasting follows numpy; gradients of broadcast operands are summed back
to the operand's shape.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float64

_grad_enabled = True


class no_grad:
    """Context manager that stops graph recording (inference paths)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NonFiniteError(FloatingPointError):
    """A tensor that must be finite holds NaN or Inf."""


class GraphError(RuntimeError):
    """backward() was called on something that cannot be differentiated."""


def _as_array(value, dtype=None) -> np.ndarray:
    arr = np.asarray(value, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None, _parents=(), op: str = "leaf"):
        if isinstance(data, np.ndarray) and dtype is None:
            self.data = data if data.dtype.kind == "f" else data.astype(DEFAULT_DTYPE)
        else:
            self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = None
        self.op = op
        if self.requires_grad and not _parents:
            if not np.all(np.isfinite(self.data)):
                raise NonFiniteError("leaf tensor contains non-finite values")
            self.grad = np.zeros_like(self.data)
        else:
            self.grad = None

    # -- basic properties ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, op: str, backward) -> "Tensor":
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        needs = _grad_enabled and any(p.requires_grad for p in parents)
        out = Tensor(data, _parents=parents if needs else (), op=op)
        if needs:
            out.requires_grad = True
            out._backward = backward
        return out

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def topological_order(self) -> list:
        """Nodes reachable from ``self`` with every node after its inputs."""
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        if self.data.size != 1:
            raise GraphError(f"backward() needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("loss is detached from every trainable leaf")
        if not np.isfinite(self.data).all():
            raise NonFiniteError(f"loss is not finite: {self.data!r}")
        order = self.topological_order()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
                # intermediates release their buffers once consumed
                node.grad = None if node._parents else node.grad
        if self._parents:
            self.grad = None

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other, self.dtype))
        a, b = self, other

        def backward(g):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._make(a.data + b.data, (a, b), "add", backward)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other, self.dtype))
        a, b = self, other

        def backward(g):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(-g, b.shape))

        return Tensor._make(a.data - b.data, (a, b), "sub", backward)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(np.asarray(other, self.dtype)) - self

    def __mul__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            return self.scale(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._make(a.data * b.data, (a, b), "mul", backward)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "Tensor":
        factor = float(factor)

        def backward(g):
            self._accumulate(g * factor)

        return Tensor._make(self.data * factor, (self,), "scale", backward)

    def square(self) -> "Tensor":
        def backward(g):
            self._accumulate(2.0 * g * self.data)

        return Tensor._make(self.data * self.data, (self,), "square", backward)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    # -- nonlinearities -----------------------------------------------------

    def relu(self) -> "Tensor":
        mask = self.data > 0

        def backward(g):
            self._accumulate(g * mask)

        return Tensor._make(self.data * mask, (self,), "relu", backward)

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)

        def backward(g):
            self._accumulate(g * (1.0 - out * out))

        return Tensor._make(out, (self,), "tanh", backward)

    def sigmoid(self) -> "Tensor":
        out = _sigmoid(self.data)

        def backward(g):
            self._accumulate(g * out * (1.0 - out))

        return Tensor._make(out, (self,), "sigmoid", backward)

    def sin(self) -> "Tensor":
        def backward(g):
            self._accumulate(g * np.cos(self.data))

        return Tensor._make(np.sin(self.data), (self,), "sin", backward)

    def cos(self) -> "Tensor":
        def backward(g):
            self._accumulate(-g * np.sin(self.data))

        return Tensor._make(np.cos(self.data), (self,), "cos", backward)

    # -- reductions and layout ----------------------------------------------

    def sum(self) -> "Tensor":
        def backward(g):
            self._accumulate(np.broadcast_to(g, self.shape))

        return Tensor._make(np.asarray(self.data.sum()), (self,), "sum", backward)

    def mean(self) -> "Tensor":
        n = self.data.size

        def backward(g):
            self._accumulate(np.broadcast_to(g / n, self.shape))

        return Tensor._make(np.asarray(self.data.mean()), (self,), "mean", backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape

        def backward(g):
            self._accumulate(g.reshape(src))

        return Tensor._make(self.data.reshape(shape), (self,), "reshape", backward)

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))

        def backward(g):
            self._accumulate(g.transpose(inverse))

        return Tensor._make(self.data.transpose(axes), (self,), "transpose", backward)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, index) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data
        src_shape = self.shape

        def backward(g):
            full = np.zeros(src_shape, dtype=g.dtype)
            np.add.at(full, index, g)
            self._accumulate(full)

        return Tensor._make(np.array(self.data[index]), (self,), "index", backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(np.array(data, dtype=dtype or DEFAULT_DTYPE), requires_grad=requires_grad)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor._make(a.data @ b.data, (a, b), "matmul", backward)


def concat(tensors: list, axis: int = -1) -> Tensor:
    arrays = [t.data for t in tensors]
    sizes = np.cumsum([a.shape[axis] for a in arrays])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            t._accumulate(piece)

    return Tensor._make(np.concatenate(arrays, axis=axis), tuple(tensors), "concat", backward)


def check_shapes(a: Tensor, b: Tensor, what: str) -> None:
    """Exact-match or scalar broadcasting; anything else is an error."""
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"{what}: incompatible shapes {a.shape} and {b.shape}")


def elementwise(op: str, *args) -> Tensor:
    """Dispatch a named elementwise operation.

    Binary ops (``add``, ``sub``, ``mul``) accept same-shape or scalar
    operands; ``scale`` takes a tensor and a Python number.
    """
    if op in ("add", "sub", "mul"):
        a, b = (x if isinstance(x, Tensor) else Tensor(np.asarray(x, DEFAULT_DTYPE)) for x in args)
        check_shapes(a, b, op)
        return {"add": a.__add__, "sub": a.__sub__, "mul": a.__mul__}[op](b)
    if op == "scale":
        a, factor = args
        return a.scale(factor)
    if op in ("relu", "tanh", "sigmoid", "sin", "cos"):
        (a,) = args
        return getattr(a, op)()
    raise ValueError(f"unknown elementwise op {op!r}")
