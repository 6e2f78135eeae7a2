"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Each op returns a new :class:`Tensor` holding its parents and a closure that
maps the output gradient to parent gradients. :func:`backward` sorts the
graph into a :class:`Tape` and walks it in reverse.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import MissingGrad, NonFiniteError, NonScalarLoss, ShapeMismatch

GradFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_grad_fn")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.array(value, dtype=np.float64)
        _check_finite(self.value, name or "tensor")
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad else None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: GradFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    def backward(self) -> None:
        backward(self)

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __neg__ = lambda self: mul(self, -1.0)
    __pow__ = lambda self, p: power(self, p)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value: np.ndarray, parents: tuple[Tensor, ...], grad_fn: GradFn, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = value
    _check_finite(value, op)
    out.name = op
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = parents
        out._grad_fn = grad_fn
    else:
        out._parents = ()
        out._grad_fn = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _node(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _node(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _node(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
                 "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.value / b.value
    return _node(out, (a, b),
                 lambda g: (_unbroadcast(g / b.value, a.shape),
                            _unbroadcast(-g * out / b.value, b.shape)),
                 "div")


def square(x) -> Tensor:
    x = as_tensor(x)
    return _node(x.value * x.value, (x,), lambda g: (2.0 * x.value * g,), "square")


def power(x, p: float) -> Tensor:
    x = as_tensor(x)
    p = float(p)
    if p == 2.0:
        return square(x)
    return _node(x.value ** p, (x,), lambda g: (p * x.value ** (p - 1.0) * g,), "power")


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(x.value)
    return _node(value, (x,), lambda g: (g / x.value,), "log")


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.value > 0
    return _node(np.where(on, x.value, 0.0), (x,), lambda g: (g * on,), "relu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = expit(x.value)
    return _node(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def clamp(x, lo: float, hi: float) -> Tensor:
    """Clip values; gradient passes only where ``lo <= x <= hi``."""
    x = as_tensor(x)
    inside = (x.value >= lo) & (x.value <= hi)
    return _node(np.clip(x.value, lo, hi), (x,), lambda g: (g * inside,), "clamp")


def stop_gradient(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.value, requires_grad=False, name="stop_gradient")


# -- linear algebra / shape ----------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    return _node(a.value @ b.value, (a, b),
                 lambda g: (g @ b.value.T, a.value.T @ g), "matmul")


def add_bias(x, b) -> Tensor:
    x, b = as_tensor(x), as_tensor(b)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"add_bias: {x.shape} + {b.shape}")
    return _node(x.value + b.value, (x, b),
                 lambda g: (g, g.reshape(-1, b.shape[0]).sum(axis=0)), "add_bias")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.value.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape: {x.shape} -> {shape}") from exc
    return _node(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)

    def grad_fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(np.asarray(x.value.sum(axis=axis)), (x,), grad_fn, "sum")


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis), 1.0 / float(n))


# -- reverse pass ----------------------------------------------------------------

class Tape:
    """Topologically ordered record of the nodes feeding one scalar output."""

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self) -> None:
        out = self.output
        grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.value)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                _check_finite(g, f"grad of {node.name or 'leaf'}")
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._grad_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg


def backward(loss: Tensor) -> Tape:
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf's ``grad``."""
    if loss.value.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    tape = Tape(loss)
    if loss.requires_grad:
        tape.backward()
    return tape


# -- optimisation --------------------------------------------------------------------

class Adam:
    """Adam with bias correction over a collection of leaf tensors."""

    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        b1, b2 = self.betas
        for p in self.params:
            if p.grad is None:
                raise MissingGrad(f"parameter {p.name!r} has no gradient")
        self.t += 1
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(optimizer: Adam, lr: float | None = None) -> None:
    """Functional alias for :meth:`Adam.step`, optionally overriding the rate."""
    if lr is not None:
        optimizer.lr = lr
    optimizer.step()


def step_decay_lr(epoch: int, base_lr: float = 1e-3, factor: float = 0.2, every: int = 40) -> float:
    """Multiply the rate by ``factor`` once every ``every`` epochs."""
    return base_lr * factor ** (epoch // every)
