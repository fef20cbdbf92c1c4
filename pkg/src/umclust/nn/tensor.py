"""Reverse-mode automatic differentiation on dense float64 arrays.

A Tensor wraps a numpy array and records the operation that produced it.
Calling ``backward()`` on a scalar result walks the recorded graph in
reverse topological order and accumulates gradients into every tensor
created with ``requires_grad=True``. Only the operations needed by the
training objective are implemented; all of them broadcast the same way
numpy does, and gradients of broadcast operands are summed back to the
operand's shape.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # Collapse leading axes added by broadcasting.
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # Sum over axes that were 1 in the original shape.
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Node in the autodiff graph: an array plus an optional backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _result(data, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad, b.data.shape))

        return Tensor._result(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def backward(grad, a=self):
            if a.requires_grad:
                a._accumulate(-grad)

        return Tensor._result(-self.data, (self,), backward)

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad * a.data, b.data.shape))

        return Tensor._result(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad / b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-grad * a.data / (b.data * b.data), b.data.shape))

        return Tensor._result(self.data / other.data, (self, other), backward)

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor(other) / self

    def __matmul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError("matmul expects 2-D operands")

        def backward(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(grad @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ grad)

        return Tensor._result(self.data @ other.data, (self, other), backward)

    # -- shape ops ---------------------------------------------------------------

    @property
    def T(self) -> "Tensor":
        def backward(grad, a=self):
            if a.requires_grad:
                a._accumulate(grad.T)

        return Tensor._result(self.data.T, (self,), backward)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def backward(grad, a=self, axis=axis, keepdims=keepdims):
            if not a.requires_grad:
                return
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities -----------------------------------------------

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(grad, a=self, od=out_data):
            if a.requires_grad:
                a._accumulate(grad * od)

        return Tensor._result(out_data, (self,), backward)

    def log(self) -> "Tensor":
        def backward(grad, a=self):
            if a.requires_grad:
                a._accumulate(grad / a.data)

        return Tensor._result(np.log(self.data), (self,), backward)

    def sqrt(self) -> "Tensor":
        out_data = np.sqrt(self.data)

        def backward(grad, a=self, od=out_data):
            if a.requires_grad:
                a._accumulate(grad * 0.5 / od)

        return Tensor._result(out_data, (self,), backward)

    def square(self) -> "Tensor":
        def backward(grad, a=self):
            if a.requires_grad:
                a._accumulate(grad * 2.0 * a.data)

        return Tensor._result(self.data * self.data, (self,), backward)

    def relu(self) -> "Tensor":
        mask = self.data > 0

        def backward(grad, a=self, mask=mask):
            if a.requires_grad:
                a._accumulate(grad * mask)

        return Tensor._result(np.where(mask, self.data, 0.0), (self,), backward)

    def clip_min(self, floor: float) -> "Tensor":
        """Elementwise max(self, floor); gradient passes only where self > floor."""
        mask = self.data > floor

        def backward(grad, a=self, mask=mask):
            if a.requires_grad:
                a._accumulate(grad * mask)

        return Tensor._result(np.where(mask, self.data, floor), (self,), backward)

    def rows(self, index: np.ndarray) -> "Tensor":
        """Gather rows by integer index; backward scatter-adds into place."""
        index = np.asarray(index, dtype=np.int64)

        def backward(grad, a=self, index=index):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                np.add.at(full, index, grad)
                a._accumulate(full)

        return Tensor._result(self.data[index], (self,), backward)

    # -- graph execution -----------------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.astype(np.float64, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf.

        `self` must be a scalar (size-1) tensor.
        """
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def concat_rows(tensors: list[Tensor]) -> Tensor:
    """Stack 2-D tensors along axis 0, differentiable in each block."""
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=0)
    offsets = np.cumsum([0] + [d.shape[0] for d in datas])

    def backward(grad, parts=tuple(tensors), offs=offsets):
        for t, lo, hi in zip(parts, offs[:-1], offs[1:]):
            if t.requires_grad:
                t._accumulate(grad[lo:hi])

    out = Tensor(out_data)
    if any(t.requires_grad for t in tensors):
        out.requires_grad = True
        out._parents = tuple(tensors)
        out._backward = backward
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax; the row max is shifted out of the exponent, which
    leaves both value and gradient exact while preventing overflow."""
    shift = x.data.max(axis=1, keepdims=True)
    e = (x - Tensor(shift)).exp()
    return e / e.sum(axis=1, keepdims=True)


def row_normalize(z: Tensor, min_sq_norm: float = 1e-60) -> Tensor:
    """Rows scaled to unit Euclidean norm; all-zero rows map to zero rows.

    The squared norm is clamped before the square root so a zero row
    divides by a tiny constant (yielding zeros) instead of producing
    NaNs, and its gradient contribution through the norm vanishes.
    """
    sq = z.square().sum(axis=1, keepdims=True)
    norm = sq.clip_min(min_sq_norm).sqrt()
    return z / norm
