"""A module containing the Tensor class, the reverse-mode Tape and every differentiable op."""

from __future__ import annotations

import itertools
import math
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from glyphweaver.errors import DimensionError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Tensor", float, int, np.ndarray]

_sequence = itertools.count()
_local = threading.local()

# Additive logit used for masked attention entries; finite so every forward value stays finite.
MASK_VALUE = -1e30


def is_grad_enabled() -> bool:
    """Return whether ops executed on this thread are recorded for backward."""
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording on the current thread, e.g. for evaluation or finite differences."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    """
    Dense float64 array with an optional place on the reverse-mode tape.
    Leaf tensors with requires_grad=True accumulate gradients into `grad`;
    tensors produced by ops remember their parents and a backward closure
    that maps the output gradient to one gradient per parent.
    """
    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, data: Union[np.ndarray, float, Sequence], requires_grad: bool = False) -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Optional[BackwardFn] = None
        self.op = "leaf"
        self.seq = next(_sequence)

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
        """Create the output of an op, attaching it to the tape when any parent needs a gradient."""
        out = cls(data)
        out.op = op
        if is_grad_enabled() and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out.parents = tuple(parents)
            out.backward_fn = backward_fn
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Run reverse-mode differentiation from this tensor."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        Tape.collect(self).backward(self, np.asarray(grad, dtype=np.float64))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # Operators
    def __add__(self, other: Operand) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Operand) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Operand) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Operand) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)

    def __pow__(self, exponent: float) -> Tensor:
        return power(self, exponent)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index) -> Tensor:
        return index_select(self, index)

    # Method forms
    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> Tensor:
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, axis1: int, axis2: int) -> Tensor:
        axes = list(range(self.ndim))
        axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
        return transpose(self, tuple(axes))

    def exp(self) -> Tensor:
        return exp(self)

    def log(self) -> Tensor:
        return log(self)

    def sqrt(self) -> Tensor:
        return power(self, 0.5)


class Tape:
    """
    Ordered record of the ops that produced a root tensor.
    Nodes are kept in execution order (creation sequence), so every op's parents
    precede it and backward visits the nodes in exact reverse execution order.
    """
    def __init__(self, nodes: list[Tensor]) -> None:
        self.nodes = nodes

    @classmethod
    def collect(cls, root: Tensor) -> Tape:
        seen: set[int] = set()
        nodes: list[Tensor] = []
        stack = [root]
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node.parents)
        nodes.sort(key=lambda node: node.seq)
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, root: Tensor, seed: np.ndarray) -> None:
        grads: dict[int, np.ndarray] = {id(root): np.broadcast_to(seed, root.shape)}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.backward_fn is None:
                node.grad = np.array(grad) if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = unbroadcast(parent_grad, parent.shape)
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, extent in enumerate(shape) if extent == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from e


# Elementwise arithmetic

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return Tensor.from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def backward(g: np.ndarray):
        return g / b.data, -g * out / b.data

    return Tensor.from_op(out, (a, b), backward, "div")


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return Tensor.from_op(a.data * factor, (a,), lambda g: (g * factor,), "scale")


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    out = a.data ** exponent
    return Tensor.from_op(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1.0),), "pow")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    cdf = 0.5 * (1.0 + special.erf(a.data / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * a.data * a.data) / math.sqrt(2.0 * math.pi)
    return Tensor.from_op(a.data * cdf, (a,), lambda g: (g * (cdf + a.data * pdf),), "gelu")


def elementwise(kind: str, *operands: Operand) -> Tensor:
    """Dispatch one of the elementwise kinds: add | mul | scale | gelu."""
    if kind == "add":
        a, b = operands
        return add(a, b)
    if kind == "mul":
        a, b = operands
        return mul(a, b)
    if kind == "scale":
        a, factor = operands
        return scale(as_tensor(a), factor)
    if kind == "gelu":
        (a,) = operands
        return gelu(as_tensor(a))
    raise ValueError(f"unknown elementwise kind: {kind}")


# Contractions and reductions

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes, broadcasting leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise DimensionError(f"matmul: batch axes of {a.shape} and {b.shape} do not broadcast") from e

    def backward(g: np.ndarray):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return Tensor.from_op(out, (a,), backward, "sum")


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = float(np.prod([a.shape[ax] for ax in axes])) if axes else 1.0
    return scale(reduce_sum(a, axes, keepdims), 1.0 / count)


# Shape manipulation

def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}") from e
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: Optional[tuple[int, ...]] = None) -> Tensor:
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose")


def index_select(a: Tensor, index) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate in backward."""
    out = np.array(a.data[index])

    def backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return Tensor.from_op(out, (a,), backward, "index")


def take_rows(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: rows of a (N, C) table for an integer id array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g: np.ndarray):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weight.shape[-1]))
        return (full,)

    return Tensor.from_op(weight.data[ids], (weight,), backward, "take_rows")


def pick_lastdim(a: Tensor, index: np.ndarray) -> Tensor:
    """out[..., ] = a[..., index[...]] (one entry per row of the last axis)."""
    index = np.asarray(index, dtype=np.int64)[..., None]
    out = np.take_along_axis(a.data, index, axis=-1)[..., 0]

    def backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, index, g[..., None], axis=-1)
        return (full,)

    return Tensor.from_op(out, (a,), backward, "pick")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"concat along axis {axis}: incompatible shapes {shapes}") from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor.from_op(out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


# Normalization

def softmax_lastdim(x: Tensor) -> Tensor:
    """Max-stabilized softmax over the last axis."""
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax needs a non-empty last axis, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(s, (x,), backward, "softmax")


def log_softmax_lastdim(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g: np.ndarray):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Layer normalization over the last axis with a hand-derived backward."""
    channels = x.shape[-1]
    if gain.shape != (channels,) or bias.shape != (channels,):
        raise DimensionError(f"layer_norm: input {x.shape} does not match gain {gain.shape} / bias {bias.shape}")
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    variance = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normed = centered * inv_std

    def backward(g: np.ndarray):
        d_normed = g * gain.data
        dx = inv_std * (
            d_normed
            - d_normed.mean(axis=-1, keepdims=True)
            - normed * (d_normed * normed).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return dx, (g * normed).sum(axis=lead), g.sum(axis=lead)

    return Tensor.from_op(normed * gain.data + bias.data, (x, gain, bias), backward, "layer_norm")


# Convolution support

def unfold2d(x: Tensor, kernel: int = 3, stride: tuple[int, int] = (1, 1)) -> Tensor:
    """
    im2col for a channels-last image batch (B, H, W, C) with edge-replicate padding.
    Returns (B, H_out, W_out, kernel*kernel*C), columns ordered (ky, kx, c).
    """
    if x.ndim != 4:
        raise DimensionError(f"unfold2d expects (B, H, W, C), got {x.shape}")
    batch, height, width, channels = x.shape
    pad = kernel // 2
    sh, sw = stride
    padded = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, (kernel, kernel), axis=(1, 2))[:, ::sh, ::sw]
    out_h, out_w = windows.shape[1], windows.shape[2]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(batch, out_h, out_w, kernel * kernel * channels)

    def backward(g: np.ndarray):
        g6 = g.reshape(batch, out_h, out_w, kernel, kernel, channels)
        grad_padded = np.zeros_like(padded)
        for ky in range(kernel):
            for kx in range(kernel):
                grad_padded[:, ky:ky + sh * (out_h - 1) + 1:sh, kx:kx + sw * (out_w - 1) + 1:sw, :] += g6[:, :, :, ky, kx, :]
        if pad == 0:
            return (grad_padded,)
        # Fold the replicated border back onto the edge pixels it was copied from.
        rows = grad_padded[:, pad:-pad].copy()
        rows[:, 0] += grad_padded[:, :pad].sum(axis=1)
        rows[:, -1] += grad_padded[:, -pad:].sum(axis=1)
        grad = rows[:, :, pad:-pad].copy()
        grad[:, :, 0] += rows[:, :, :pad].sum(axis=2)
        grad[:, :, -1] += rows[:, :, -pad:].sum(axis=2)
        return (grad,)

    return Tensor.from_op(np.ascontiguousarray(cols), (x,), backward, "unfold2d")
