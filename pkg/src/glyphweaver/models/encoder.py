"""A module containing the decayed-attention encoder: stem, attention blocks, height downsampling and multi-scale fusion."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from glyphweaver.autograd.tensor import Tensor, as_tensor, concat, gelu, softmax_lastdim
from glyphweaver.errors import ConfigError, DimensionError
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.decay import TokenGrid, build_decay
from glyphweaver.models.layers import Conv2d, LayerNorm, Linear, Mlp, Module
from glyphweaver.models.rotary import RotaryTable, apply_rotary, pair_logits

logger = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def rotary_table(grid: TokenGrid, head_dim: int, base_freq: float) -> RotaryTable:
    return RotaryTable(grid, head_dim, base_freq)


@dataclass
class AttentionMap:
    """Post-softmax (and post-decay) attention of one block, shape (B, heads, L, L)."""
    block: int
    stage: int
    grid: TokenGrid
    weights: np.ndarray
    decayed: bool


@dataclass
class StageOutput:
    """Per-stage token features before fusion."""
    f1: Tensor
    f2: Tensor
    f3: Tensor
    grids: tuple[TokenGrid, TokenGrid, TokenGrid]

    def __iter__(self):
        return iter((self.f1, self.f2, self.f3))


@dataclass
class EncoderOutput:
    fused: Tensor
    stages: StageOutput
    attention: list[AttentionMap] = field(default_factory=list)


class PatchEmbed(Module):
    """Two stride-2 3x3 convolutions (1 -> C1/2 -> C1) with a GELU in between: a 4x4 reduction."""
    def __init__(self, width: int, rng: np.random.Generator) -> None:
        self.conv1 = Conv2d(1, width // 2, rng, stride=(2, 2))
        self.conv2 = Conv2d(width // 2, width, rng, stride=(2, 2))

    def __call__(self, images: Tensor) -> tuple[Tensor, TokenGrid]:
        if images.ndim != 4 or images.shape[-1] != 1:
            raise DimensionError(f"patch embedding expects (B, H, W, 1) images, got {images.shape}")
        maps = self.conv2(gelu(self.conv1(images)))
        batch, height, width, channels = maps.shape
        return maps.reshape(batch, height * width, channels), TokenGrid(height, width)


class HeightDownsample(Module):
    """3x3 convolution with stride (2, 1): halves the grid height, keeps its width."""
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator) -> None:
        self.conv = Conv2d(in_channels, out_channels, rng, stride=(2, 1))

    def __call__(self, tokens: Tensor, grid: TokenGrid) -> tuple[Tensor, TokenGrid]:
        if grid.height % 2:
            raise ConfigError(f"cannot halve odd grid height {grid.height}")
        if tokens.ndim != 3 or tokens.shape[1] != grid.length:
            raise DimensionError(f"tokens {tokens.shape} do not match a {grid.height}x{grid.width} grid")
        batch, _, channels = tokens.shape
        maps = self.conv(tokens.reshape(batch, grid.height, grid.width, channels))
        new_grid = TokenGrid(grid.height // 2, grid.width)
        return maps.reshape(batch, new_grid.length, maps.shape[-1]), new_grid


class CaceBlock(Module):
    """
    Pre-norm attention block whose post-softmax attention is optionally multiplied by a decay matrix,
    followed by a pre-norm MLP. Queries get the rotary angle, keys its conjugate.
    """
    def __init__(self, width: int, heads: int, mlp_ratio: int, rng: np.random.Generator,
                 scale_mode: str = "sqrt_d", base_freq: float = 10000.0) -> None:
        if width % heads:
            raise ConfigError(f"width {width} is not divisible by {heads} heads")
        self.width = width
        self.heads = heads
        self.head_dim = width // heads
        self.base_freq = base_freq
        self.scale = 1.0 / (math.sqrt(self.head_dim) if scale_mode == "sqrt_d" else self.head_dim)
        self.norm1 = LayerNorm(width)
        self.query = Linear(width, width, rng, bias=False)
        self.key = Linear(width, width, rng, bias=False)
        self.value = Linear(width, width, rng, bias=False)
        self.norm2 = LayerNorm(width)
        self.mlp = Mlp(width, mlp_ratio, rng)

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def attention(self, x: Tensor, grid: TokenGrid, decay: Optional[np.ndarray] = None) -> Tensor:
        """Attention weights (B, heads, L, L) after softmax and, when given, after the decay product."""
        self._check(x, grid, decay)
        return self._attend(self.norm1(x), grid, decay)

    def _check(self, x: Tensor, grid: TokenGrid, decay: Optional[np.ndarray]) -> None:
        if x.ndim != 3 or x.shape[1] != grid.length or x.shape[2] != self.width:
            raise DimensionError(f"block expects (B, {grid.length}, {self.width}), got {x.shape}")
        if decay is not None and decay.shape != (self.heads, grid.length, grid.length):
            raise DimensionError(
                f"decay shape {decay.shape} does not match ({self.heads}, {grid.length}, {grid.length})"
            )

    def _attend(self, normed: Tensor, grid: TokenGrid, decay: Optional[np.ndarray]) -> Tensor:
        table = rotary_table(grid, self.head_dim, self.base_freq)
        q = apply_rotary(self._split_heads(self.query(normed)), table)
        k = apply_rotary(self._split_heads(self.key(normed)), table, conjugate=True)
        weights = softmax_lastdim(pair_logits(q, k) * self.scale)
        return weights * decay if decay is not None else weights

    def __call__(self, x: Tensor, grid: TokenGrid, decay: Optional[np.ndarray] = None,
                 capture: Optional[list[np.ndarray]] = None) -> Tensor:
        self._check(x, grid, decay)
        normed = self.norm1(x)
        weights = self._attend(normed, grid, decay)
        if capture is not None:
            capture.append(weights.numpy())
        v = self._split_heads(self.value(normed))
        batch, length, _ = x.shape
        mixed = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, length, self.width)
        x = x + mixed
        return x + self.mlp(self.norm2(x))


class CaceEncoder(Module):
    """
    Three-stage encoder producing fused memory tokens F.

    Blocks are numbered globally from 1; block n uses the decay matrix when n <= decay_order[0].
    Stage outputs are projected to fused_width and concatenated along the token axis,
    giving HW/16 + HW/32 + HW/64 tokens (only the HW/64 stage-3 tokens without fusion).
    """
    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        self._config = config
        widths, depths, heads = config.stage_widths, config.stage_depths, config.stage_heads
        self.stem = PatchEmbed(widths[0], rng)
        self.blocks = [
            CaceBlock(widths[stage], heads[stage], config.mlp_ratio, rng, config.scale_mode, config.base_freq)
            for stage in range(3)
            for _ in range(depths[stage])
        ]
        self.downsamples = [HeightDownsample(widths[0], widths[1], rng), HeightDownsample(widths[1], widths[2], rng)]
        fused_stages = range(3) if config.use_fusion else (2,)
        self.fusion = [Linear(widths[stage], config.fused_width, rng) for stage in fused_stages]
        logger.debug("encoder: %d blocks, decay on blocks 1-%d, fusion %s", len(self.blocks), config.decay_order[0], config.use_fusion)

    @property
    def config(self) -> ModelConfig:
        return self._config

    def patch_embed(self, images: Union[Tensor, np.ndarray]) -> tuple[Tensor, TokenGrid]:
        images = as_tensor(images)
        height, width = self._config.image_size
        if images.ndim != 4 or images.shape[1:] != (height, width, 1):
            raise DimensionError(f"expected images (B, {height}, {width}, 1), got {images.shape}")
        return self.stem(images)

    def decay_for(self, stage: int, grid: TokenGrid) -> np.ndarray:
        spec = self._config.decay.spec_for(self._config.stage_heads[stage])
        return build_decay(spec, grid)

    def encode(self, images: Union[Tensor, np.ndarray], capture_attention: bool = False) -> EncoderOutput:
        """
        Run all three stages and fuse their outputs.

        Args:
            images: Batch of (B, H, W, 1) images in [0, 1]
            capture_attention: Keep every block's attention weights in the output

        Returns:
            EncoderOutput with fused tokens (B, N, C), stage features and captured attention
        """
        config = self._config
        tokens, grid = self.patch_embed(images)
        features: list[Tensor] = []
        grids: list[TokenGrid] = []
        maps: list[AttentionMap] = []
        block_number = 0
        for stage in range(3):
            if stage > 0:
                tokens, grid = self.downsamples[stage - 1](tokens, grid)
            for _ in range(config.stage_depths[stage]):
                block = self.blocks[block_number]
                block_number += 1
                decayed = config.uses_decay(block_number)
                decay = self.decay_for(stage, grid) if decayed else None
                capture: Optional[list[np.ndarray]] = [] if capture_attention else None
                tokens = block(tokens, grid, decay, capture)
                if capture:
                    maps.append(AttentionMap(block_number, stage + 1, grid, capture[0], decayed))
            features.append(tokens)
            grids.append(grid)

        if config.use_fusion:
            fused = concat([project(f) for project, f in zip(self.fusion, features)], axis=1)
        else:
            fused = self.fusion[0](features[2])
        return EncoderOutput(fused, StageOutput(*features, grids=tuple(grids)), maps)

    def __call__(self, images: Union[Tensor, np.ndarray]) -> Tensor:
        return self.encode(images).fused
