"""A module containing the spatial decay matrices that constrain attention to nearby tokens."""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from glyphweaver.errors import ConfigError

DECAY_OPTIONS = (1, 2, 3)


@dataclass(frozen=True)
class TokenGrid:
    """Row-major token layout: flattened index i = y * width + x."""
    height: int
    width: int

    @property
    def length(self) -> int:
        return self.height * self.width

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) integer coordinates of every flattened token index."""
        index = np.arange(self.length)
        return index % self.width, index // self.width

    def index_of(self, x: int, y: int) -> int:
        return y * self.width + x

    def chebyshev(self) -> np.ndarray:
        """L x L matrix of max(|dx|, |dy|) distances."""
        dx, dy = self._offsets()
        return np.maximum(dx, dy)

    def _offsets(self) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = self.coords
        return np.abs(xs[:, None] - xs[None, :]), np.abs(ys[:, None] - ys[None, :])


@dataclass(frozen=True)
class DecaySpec:
    """
    Decay option and its parameters for one stage.
    gammas holds one value per head; option 3 only uses its length (head count).
    """
    option: int = 2
    gammas: tuple[float, ...] = (0.96875,)
    window: tuple[int, int] = (5, 3)

    def __post_init__(self) -> None:
        if self.option not in DECAY_OPTIONS:
            raise ConfigError(f"decay option must be one of {DECAY_OPTIONS}, got {self.option}")
        if not self.gammas:
            raise ConfigError("decay spec needs at least one head")
        if self.option in (1, 2) and any(not 0.0 < gamma < 1.0 for gamma in self.gammas):
            raise ConfigError(f"gamma values must lie in (0, 1), got {self.gammas}")
        w, h = self.window
        if w < 0 or h < 0:
            raise ConfigError(f"decay window must be non-negative, got {self.window}")

    @property
    def num_heads(self) -> int:
        return len(self.gammas)


def gamma_schedule(num_heads: int) -> list[float]:
    """Per-head decay rates 1 - 2^(-5-h), strictly increasing towards 1."""
    if num_heads < 1:
        raise ConfigError(f"num_heads must be >= 1, got {num_heads}")
    return [1.0 - 2.0 ** (-5 - head) for head in range(num_heads)]


def build_decay(spec: DecaySpec, grid: TokenGrid) -> np.ndarray:
    """
    Build D[head, i, j] for a token grid.
    The result is cached per (spec, grid) and returned read-only; no gradient flows into it.
    """
    return _cached_decay(spec, grid)


@lru_cache(maxsize=64)
def _cached_decay(spec: DecaySpec, grid: TokenGrid) -> np.ndarray:
    dx, dy = grid._offsets()
    if spec.option == 3:
        w, h = spec.window
        window = ((dx <= w) & (dy <= h)).astype(np.float64)
        decay = np.broadcast_to(window, (spec.num_heads, grid.length, grid.length)).copy()
    else:
        exponent = dx + dy if spec.option == 1 else np.maximum(dx, dy)
        # Exponents are small integers: a per-head power table keeps values identical to gamma ** e.
        table = np.array([[gamma ** e for e in range(int(exponent.max()) + 1)] for gamma in spec.gammas])
        decay = table[:, exponent]
    decay.flags.writeable = False
    return decay
