"""A module containing the parameter container and the basic trainable layers."""

import math
from typing import Iterator

import numpy as np

from glyphweaver.autograd.tensor import Tensor, gelu, layer_norm, take_rows, unfold2d
from glyphweaver.errors import CheckpointError, DimensionError


def parameter(values: np.ndarray) -> Tensor:
    return Tensor(values, requires_grad=True)


class Module:
    """
    Base class for anything holding trainable tensors.
    Parameters are discovered from instance attributes in assignment order, which
    makes parameter names and ordering deterministic across runs.
    """
    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [param for _, param in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(param.size for param in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            raise CheckpointError(f"parameter names differ: missing {missing}, unexpected {unexpected}")
        for name, param in params.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise CheckpointError(f"{name}: stored shape {values.shape} != model shape {param.shape}")
            param.data[...] = values


class Linear(Module):
    """y = x W + b with W stored as (in_features, out_features)."""
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True) -> None:
        std = math.sqrt(2.0 / (in_features + out_features))
        self.weight = parameter(rng.normal(0.0, std, size=(in_features, out_features)))
        self.bias = parameter(np.zeros(out_features)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, channels: int, eps: float = 1e-5) -> None:
        self.gain = parameter(np.ones(channels))
        self.bias = parameter(np.zeros(channels))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class Conv2d(Module):
    """3x3 (by default) convolution over channels-last maps, edge-replicate padding."""
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 stride: tuple[int, int] = (1, 1), kernel: int = 3) -> None:
        self.kernel = kernel
        self.stride = stride
        self.in_channels = in_channels
        fan_in = kernel * kernel * in_channels
        self.weight = parameter(rng.normal(0.0, math.sqrt(2.0 / (fan_in + out_channels)), size=(fan_in, out_channels)))
        self.bias = parameter(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[-1] != self.in_channels:
            raise DimensionError(f"conv expects (B, H, W, {self.in_channels}), got {x.shape}")
        return unfold2d(x, self.kernel, self.stride) @ self.weight + self.bias


class Embedding(Module):
    def __init__(self, count: int, width: int, rng: np.random.Generator) -> None:
        self.weight = parameter(rng.normal(0.0, 1.0 / math.sqrt(width), size=(count, width)))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return take_rows(self.weight, ids)


class Mlp(Module):
    """Two-layer feed-forward block with a GELU in between."""
    def __init__(self, width: int, ratio: int, rng: np.random.Generator) -> None:
        self.fc1 = Linear(width, width * ratio, rng)
        self.fc2 = Linear(width * ratio, width, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))
