"""
N-dimensional tensors with reverse-mode automatic differentiation.

A Tensor wraps a row-major numpy array. Operations on tensors that require
gradients record their parents and a backward closure; ``backward`` replays
that record in reverse topological order (the Tape).
"""

from contextlib import contextmanager
import logging

import numpy as np

from ..exceptions import ContractError, DimensionError

logger = logging.getLogger(__name__)

DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
}

_state = {
    "dtype": np.float32,
    "grad_enabled": True,
}


def get_default_dtype():
    """Return the numpy dtype new tensors are created with."""
    return _state["dtype"]


@contextmanager
def precision(name):
    """
    Switch the compute dtype inside a ``with`` block.

    float32 is the compute precision; float64 exists for gradient checks.

    Args:
        name (str): "float32" or "float64"
    """
    if name not in DTYPES:
        raise ContractError(f"Unknown precision '{name}', expected one of {sorted(DTYPES)}")
    previous = _state["dtype"]
    _state["dtype"] = DTYPES[name]
    try:
        yield
    finally:
        _state["dtype"] = previous


@contextmanager
def no_grad():
    """Disable tape recording inside a ``with`` block."""
    previous = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = previous


def is_grad_enabled():
    return _state["grad_enabled"]


def unbroadcast(grad, shape):
    """
    Sum a gradient over the axes numpy broadcasting expanded.

    Args:
        grad (np.ndarray): Gradient with the broadcast result's shape
        shape (tuple): Shape of the operand the gradient flows to

    Returns:
        np.ndarray: Gradient reduced to ``shape``
    """
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _is_basic_index(index):
    # Slices, integers and Ellipsis never repeat an element.
    items = index if isinstance(index, tuple) else (index,)
    return all(
        item is Ellipsis or item is None or isinstance(item, (slice, int, np.integer))
        for item in items
    )


def as_tensor(value):
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tensor:
    """
    A numeric array that can take part in gradient computation.

    Attributes:
        data: numpy array holding the values (row-major)
        requires_grad: whether gradients are accumulated for this tensor
        grad: same-shape gradient accumulator, populated by ``backward``
        op: name of the operation that produced the tensor ("leaf" for inputs)
    """

    # numpy operators defer to the reflected Tensor methods
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, name=None):
        array = np.asarray(data)
        dtype = get_default_dtype()
        if array.dtype != dtype:
            array = array.astype(dtype)
        self.data = array
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.op = "leaf"
        self._parents = ()
        self._backward = None

    @classmethod
    def from_op(cls, data, parents, backward, op):
        """
        Create the result of an operation and record it on the tape.

        Args:
            data (np.ndarray): Forward result
            parents (tuple[Tensor]): Operands, in the order ``backward`` returns grads
            backward (callable): Maps the output gradient to one gradient per parent
                (``None`` for parents that receive nothing)
            op (str): Operation name for diagnostics
        """
        out = cls(data)
        out.op = op
        if _state["grad_enabled"] and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # ------------------------------------------------------------------
    # Introspection

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return self.data.item()

    def numpy(self):
        """Return a copy of the values as a numpy array."""
        return self.data.copy()

    def detach(self):
        """Return a constant tensor sharing the values but not the tape."""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # Arithmetic

    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(grad):
            return unbroadcast(grad, a_shape), unbroadcast(grad, b_shape)

        return Tensor.from_op(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(grad):
            return unbroadcast(grad, a_shape), unbroadcast(-grad, b_shape)

        return Tensor.from_op(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(grad):
            return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)

        return Tensor.from_op(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(grad):
            return unbroadcast(grad / b, a.shape), unbroadcast(-grad * a / (b * b), b.shape)

        return Tensor.from_op(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor.from_op(-self.data, (self,), lambda grad: (-grad,), "neg")

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise ContractError("Tensor exponents are not supported; use a Python scalar")
        x = self.data

        def backward(grad):
            return (grad * exponent * x ** (exponent - 1),)

        return Tensor.from_op(x ** exponent, (self,), backward, "pow")

    def __matmul__(self, other):
        from .functional import matmul

        return matmul(self, other)

    # ------------------------------------------------------------------
    # Elementwise

    def exp(self):
        y = np.exp(self.data)
        return Tensor.from_op(y, (self,), lambda grad: (grad * y,), "exp")

    def log(self):
        x = self.data
        return Tensor.from_op(np.log(x), (self,), lambda grad: (grad / x,), "log")

    def abs(self):
        x = self.data
        return Tensor.from_op(np.abs(x), (self,), lambda grad: (grad * np.sign(x),), "abs")

    def tanh(self):
        y = np.tanh(self.data)
        return Tensor.from_op(y, (self,), lambda grad: (grad * (1.0 - y * y),), "tanh")

    # ------------------------------------------------------------------
    # Reductions

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(grad):
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            return (np.broadcast_to(grad, shape).copy(),)

        return Tensor.from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ------------------------------------------------------------------
    # Shape manipulation

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        try:
            data = self.data.reshape(shape)
        except ValueError as exc:
            raise DimensionError(f"Cannot reshape {original} into {shape}") from exc
        return Tensor.from_op(data, (self,), lambda grad: (grad.reshape(original),), "reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(
            self.data.transpose(axes), (self,), lambda grad: (grad.transpose(inverse),), "transpose"
        )

    def swap_last(self):
        """Swap the two trailing axes."""
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(tuple(axes))

    def __getitem__(self, index):
        shape = self.shape
        dtype = self.dtype
        basic = _is_basic_index(index)

        def backward(grad):
            full = np.zeros(shape, dtype=dtype)
            if basic:
                full[index] = grad
            else:
                np.add.at(full, index, grad)
            return (full,)

        return Tensor.from_op(self.data[index], (self,), backward, "getitem")

    # ------------------------------------------------------------------
    # Gradients

    def backward(self):
        """Populate ``grad`` on every tensor that contributed to this scalar."""
        backward(self)


class Tape:
    """
    Reverse-mode replay record for one scalar result.

    ``nodes`` lists every tensor reachable from the root through recorded
    operations, in topological order (operands before results). Each node
    appears exactly once.
    """

    def __init__(self, root):
        self.root = root
        self.nodes = self._topological_order(root)

    @staticmethod
    def _topological_order(root):
        order = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))
        return order

    def replay(self, seed):
        """
        Propagate ``seed`` (dLoss/dRoot) back through the recorded operations.
        """
        grads = {id(self.root): seed}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            node.grad = grad if node.grad is None else node.grad + grad
            if node._backward is None:
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = np.asarray(parent_grad, dtype=parent.dtype)


def backward(loss):
    """
    Compute dLoss/dx for every tensor on the loss's tape.

    Args:
        loss (Tensor): A single-element tensor produced with gradients enabled

    Raises:
        ContractError: If the loss is not a scalar or has no recorded history
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward() expects a Tensor")
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward() called on a tensor that is not on the tape")
    tape = Tape(loss)
    tape.replay(np.ones(loss.shape, dtype=loss.dtype))
    return tape
