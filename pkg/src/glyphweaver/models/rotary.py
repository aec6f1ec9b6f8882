"""A module containing the 2D axial rotary position encoding applied to queries and keys."""

from dataclasses import dataclass, field

import numpy as np

from glyphweaver.autograd.tensor import Tensor, matmul, mul
from glyphweaver.errors import ConfigError, DimensionError
from glyphweaver.models.decay import TokenGrid


@dataclass(frozen=True)
class RotaryTable:
    """
    Per-token (cos, sin) tables for one head dimension.
    Consecutive value pairs are treated as complex numbers. The first half of the pairs
    rotates by the token's x coordinate, the second half by its y coordinate, with
    frequencies base^(-2k / d_axial).
    """
    grid: TokenGrid
    head_dim: int
    base_freq: float = 10000.0
    cos: np.ndarray = field(init=False, repr=False, compare=False)
    sin: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.head_dim % 2 or (self.head_dim // 2) % 2:
            raise ConfigError(f"rotary head dim {self.head_dim} must split into two even axial halves")
        axial = self.head_dim // 2
        freqs = self.base_freq ** (-2.0 * np.arange(axial // 2) / axial)
        xs, ys = self.grid.coords
        angles = np.concatenate([xs[:, None] * freqs, ys[:, None] * freqs], axis=1)
        cos, sin = np.cos(angles), np.sin(angles)
        cos.flags.writeable = False
        sin.flags.writeable = False
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)

    @property
    def length(self) -> int:
        return self.grid.length


def rotate_pairs(values: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    """Rotate (..., L, d) arrays pairwise by angle tables of shape (L, d/2)."""
    pairs = values.reshape(*values.shape[:-1], -1, 2)
    re, im = pairs[..., 0], pairs[..., 1]
    out = np.empty_like(pairs)
    out[..., 0] = re * cos - im * sin
    out[..., 1] = re * sin + im * cos
    return out.reshape(values.shape)


def apply_rotary(x: Tensor, table: RotaryTable, conjugate: bool = False) -> Tensor:
    """
    Rotate every token of x (B, heads, L, d_head) by its grid angle.

    Args:
        x: Queries or keys laid out as (B, heads, L, d_head)
        table: Angle tables for the same grid and head dim
        conjugate: Rotate by -angle (keys) instead of +angle (queries)

    Returns:
        Tensor of the same shape; each value pair keeps its norm
    """
    if x.shape[-1] % 2:
        raise ConfigError(f"rotary needs an even head dim, got {x.shape[-1]}")
    if x.shape[-2:] != (table.length, table.head_dim):
        raise DimensionError(f"rotary table is ({table.length}, {table.head_dim}) but input is {x.shape}")
    sin = -table.sin if conjugate else table.sin
    out = rotate_pairs(x.data, table.cos, sin)
    # The rotation is orthogonal, so its adjoint is the opposite rotation.
    return Tensor.from_op(out, (x,), lambda g: (rotate_pairs(g, table.cos, -sin),), "rotary")


def conjugate_pairs(x: Tensor) -> Tensor:
    """Negate the imaginary (odd) component of every value pair."""
    signs = np.ones(x.shape[-1])
    signs[1::2] = -1.0
    return mul(x, signs)


def pair_logits(q: Tensor, k: Tensor) -> Tensor:
    """
    Sum over value pairs of Re(q_p * k_p) for every query/key combination: (..., Lq, d) x (..., Lk, d) -> (..., Lq, Lk).
    For q rotated by +angle_i and k by -angle_j the result depends only on angle_i - angle_j.
    """
    return matmul(q, conjugate_pairs(k).swapaxes(-1, -2))
