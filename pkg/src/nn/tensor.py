"""
Reverse-mode automatic differentiation over numpy float64 arrays.

Each differentiable op is a ``Function`` that runs its forward pass on raw
arrays and keeps what it needs for the backward pass. Outputs of ops whose
inputs require gradients carry the producing ``Function`` as their trace;
``Tensor.backward`` walks that trace in reverse topological order and
accumulates gradients into the leaf tensors.
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.exceptions import BackwardError, ShapeMismatchError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_ctx")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _ctx: Optional["Function"] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._ctx = _ctx

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def has_trace(self) -> bool:
        return self._ctx is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    # Arithmetic

    def __neg__(self) -> "Tensor":
        return Neg.apply(self)

    def __add__(self, other: ArrayLike) -> "Tensor":
        return Add.apply(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return Add.apply(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return Sub.apply(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return Sub.apply(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return Mul.apply(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return Mul.apply(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return Div.apply(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return Div.apply(other, self)

    def __pow__(self, exponent: float) -> "Tensor":
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return MatMul.apply(self, other)

    # Reductions and elementwise maps

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def leaky_relu(self, slope: float = 0.01) -> "Tensor":
        return LeakyReLU.apply(self, slope=slope)

    def softmax(self, axis: int = -1) -> "Tensor":
        return Softmax.apply(self, axis=axis)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        return LogSoftmax.apply(self, axis=axis)

    def reshape(self, *shape: int) -> "Tensor":
        return Reshape.apply(self, shape=shape)

    def take_rows(self, index: np.ndarray) -> "Tensor":
        """Gather rows ``self[index]``; repeated indices accumulate on backward."""
        return TakeRows.apply(self, index=np.asarray(index, dtype=np.int64))

    def pick(self, index: np.ndarray) -> "Tensor":
        """Per-row gather ``self[i, index[i]]`` of a 2-D tensor."""
        return Pick.apply(self, index=np.asarray(index, dtype=np.int64))

    def clip(self, low: float, high: float) -> "Tensor":
        return Clip.apply(self, low=low, high=high)

    # Backward pass

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        """Accumulate d(self)/d(leaf) * grad into every leaf that requires a gradient."""
        if self._ctx is None:
            raise BackwardError("backward() on a tensor without a forward trace")
        if grad is None:
            if self.data.size != 1:
                raise BackwardError(f"backward() on non-scalar output of shape {self.shape} needs an explicit gradient")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad.data if isinstance(grad, Tensor) else grad, dtype=np.float64)
            if seed.shape != self.shape:
                raise ShapeMismatchError("backward", self.shape, seed.shape)

        pending: Dict[int, np.ndarray] = {id(self): seed}
        for node in reversed(self._topological_order()):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node._ctx is None:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._ctx.parents, node._ctx.backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data: Any, name: Optional[str] = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` along the axes broadcasting expanded."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, left: np.ndarray, right: np.ndarray) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(left.shape, right.shape)
    except ValueError:
        raise ShapeMismatchError(op, left.shape, right.shape) from None


class Function:
    """One node of the trace: forward on arrays, backward to per-parent gradients."""

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @classmethod
    def apply(cls, *inputs: ArrayLike, **options: Any) -> Tensor:
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(*tensors)
        out = fn.forward(*[t.data for t in tensors], **options)
        requires_grad = any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, _ctx=fn if requires_grad else None)

    def forward(self, *args: np.ndarray, **options: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Add(Function):
    def forward(self, x, y):
        _broadcast_shape("add", x, y)
        self.shapes = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, x, y):
        _broadcast_shape("sub", x, y)
        self.shapes = (x.shape, y.shape)
        return x - y

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, x, y):
        _broadcast_shape("mul", x, y)
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return _unbroadcast(grad * self.y, self.x.shape), _unbroadcast(grad * self.x, self.y.shape)


class Div(Function):
    def forward(self, x, y):
        _broadcast_shape("div", x, y)
        self.x, self.y = x, y
        return x / y

    def backward(self, grad):
        return (
            _unbroadcast(grad / self.y, self.x.shape),
            _unbroadcast(-grad * self.x / (self.y * self.y), self.y.shape),
        )


class Pow(Function):
    def forward(self, x, exponent):
        self.x, self.exponent = x, exponent
        return x ** exponent

    def backward(self, grad):
        return (grad * self.exponent * self.x ** (self.exponent - 1.0),)


class MatMul(Function):
    def forward(self, x, y):
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
            raise ShapeMismatchError("matmul", x.shape, y.shape)
        self.x, self.y = x, y
        return x @ y

    def backward(self, grad):
        return grad @ self.y.T, self.x.T @ grad


class Sum(Function):
    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class LeakyReLU(Function):
    def forward(self, x, slope):
        self.scale = np.where(x > 0, 1.0, slope)
        return x * self.scale

    def backward(self, grad):
        return (grad * self.scale,)


class Softmax(Function):
    def forward(self, x, axis):
        shifted = np.exp(x - np.max(x, axis=axis, keepdims=True))
        self.out = shifted / np.sum(shifted, axis=axis, keepdims=True)
        self.axis = axis
        return self.out

    def backward(self, grad):
        inner = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSoftmax(Function):
    def forward(self, x, axis):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        log_norm = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        out = shifted - log_norm
        self.probs = np.exp(out)
        self.axis = axis
        return out

    def backward(self, grad):
        return (grad - self.probs * np.sum(grad, axis=self.axis, keepdims=True),)


class Reshape(Function):
    def forward(self, x, shape):
        self.in_shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class TakeRows(Function):
    def forward(self, x, index):
        self.in_shape, self.index = x.shape, index
        return x[index]

    def backward(self, grad):
        out = np.zeros(self.in_shape)
        np.add.at(out, self.index, grad)
        return (out,)


class Pick(Function):
    def forward(self, x, index):
        if x.ndim != 2 or index.shape != (x.shape[0],):
            raise ShapeMismatchError("pick", x.shape, index.shape)
        self.in_shape, self.index = x.shape, index
        return x[np.arange(x.shape[0]), index]

    def backward(self, grad):
        out = np.zeros(self.in_shape)
        out[np.arange(self.in_shape[0]), self.index] = grad
        return (out,)


class SegmentSum(Function):
    def forward(self, x, segments, n_segments):
        if segments.shape != (x.shape[0],):
            raise ShapeMismatchError("segment_sum", x.shape, segments.shape)
        self.segments = segments
        out = np.zeros((n_segments,) + x.shape[1:])
        np.add.at(out, segments, x)
        return out

    def backward(self, grad):
        return (grad[self.segments],)


class Minimum(Function):
    def forward(self, x, y):
        _broadcast_shape("minimum", x, y)
        self.x_shape, self.y_shape = x.shape, y.shape
        self.take_x = x <= y
        return np.minimum(x, y)

    def backward(self, grad):
        return (
            _unbroadcast(np.where(self.take_x, grad, 0.0), self.x_shape),
            _unbroadcast(np.where(self.take_x, 0.0, grad), self.y_shape),
        )


class Clip(Function):
    def forward(self, x, low, high):
        self.inside = (x >= low) & (x <= high)
        return np.clip(x, low, high)

    def backward(self, grad):
        return (np.where(self.inside, grad, 0.0),)


class Concat(Function):
    def forward(self, *xs, axis):
        self.sizes = [x.shape[axis] for x in xs]
        self.axis = axis
        return np.concatenate(xs, axis=axis)

    def backward(self, grad):
        cuts = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, cuts, axis=self.axis))


def segment_sum(x: ArrayLike, segments: np.ndarray, n_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``n_segments`` buckets; empty buckets are zero."""
    return SegmentSum.apply(x, segments=np.asarray(segments, dtype=np.int64), n_segments=int(n_segments))


def minimum(x: ArrayLike, y: ArrayLike) -> Tensor:
    """Elementwise minimum; ties route the gradient to ``x``."""
    return Minimum.apply(x, y)


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)
