"""A module containing attention diagnostics: locality, window mass and per-head heatmap dumps."""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from glyphweaver.autograd.tensor import no_grad
from glyphweaver.corpus.pgm import write_pgm
from glyphweaver.errors import InputError
from glyphweaver.models.decay import TokenGrid
from glyphweaver.models.encoder import AttentionMap
from glyphweaver.models.recognizer import GlyphRecognizer

logger = logging.getLogger(__name__)


def locality_of(weights: np.ndarray, grid: TokenGrid) -> np.ndarray:
    """
    Attention-weighted Chebyshev distance sum_j a_ij * cheb(i, j), averaged over queries
    (and any leading batch axes except the head axis).

    Args:
        weights: (..., heads, L, L) or (L, L) attention
        grid: Token grid of the attended stage

    Returns:
        One value per head (a scalar array for a bare (L, L) matrix)
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape[-2:] != (grid.length, grid.length):
        raise InputError(f"attention {weights.shape} does not match a grid of {grid.length} tokens")
    per_query = (weights * grid.chebyshev()).sum(axis=-1)
    if weights.ndim == 2:
        return per_query.mean()
    per_head = per_query.mean(axis=-1)
    return per_head.reshape(-1, per_head.shape[-1]).mean(axis=0)


def attention_locality(maps: list[AttentionMap]) -> dict[str, float]:
    """Locality per block and head, keyed 'block{n}.head{h}'."""
    result: dict[str, float] = {}
    for attention in maps:
        for head, value in enumerate(locality_of(attention.weights, attention.grid)):
            result[f"block{attention.block}.head{head}"] = float(value)
    return result


def capture_attention(model: GlyphRecognizer, images: np.ndarray) -> list[AttentionMap]:
    with no_grad():
        return model.encoder.encode(images, capture_attention=True).attention


def mean_decayed_locality(maps: list[AttentionMap], blocks: list[int]) -> float:
    """Mean locality over the given block numbers, all heads."""
    values = [locality_of(m.weights, m.grid).mean() for m in maps if m.block in blocks]
    if not values:
        raise InputError(f"no captured attention for blocks {blocks}")
    return float(np.mean(values))


def window_mass(row: np.ndarray, grid: TokenGrid, query: int, window: tuple[int, int] = (5, 3)) -> float:
    """Attention mass of one query row inside the |dx| <= w, |dy| <= h window around the query."""
    xs, ys = grid.coords
    qx, qy = xs[query], ys[query]
    inside = (np.abs(xs - qx) <= window[0]) & (np.abs(ys - qy) <= window[1])
    return float(np.asarray(row)[inside].sum())


def stage_query(query: int, first_grid: TokenGrid, grid: TokenGrid) -> int:
    """Map a stage-1 token index onto a later stage's grid (height is halved per stage, width kept)."""
    x, y = int(first_grid.coords[0][query]), int(first_grid.coords[1][query])
    factor = first_grid.height // grid.height
    return grid.index_of(x, y // factor)


def heatmap(row: np.ndarray, grid: TokenGrid) -> np.ndarray:
    """Attention row reshaped to the grid and linearly scaled so its maximum maps to 255."""
    values = np.asarray(row, dtype=np.float64).reshape(grid.height, grid.width)
    peak = values.max()
    scaled = values / peak if peak > 0 else values
    return np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)


def dump_attention(maps: list[AttentionMap], query: int, out_dir: Union[str, Path], sample: int = 0) -> list[Path]:
    """
    Write one PGM heatmap per (block, head) for a query token.

    Args:
        maps: Captured attention, stage-1 maps first
        query: Query token index on the stage-1 grid; mapped to the same column and scaled row later on
        out_dir: Destination directory
        sample: Batch entry to visualize

    Returns:
        Paths of the written files, in block then head order
    """
    if not maps:
        raise InputError("no attention maps to dump")
    first_grid = maps[0].grid
    if not 0 <= query < first_grid.length:
        raise InputError(f"query {query} is outside a grid of {first_grid.length} tokens")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for attention in maps:
        local_query = stage_query(query, first_grid, attention.grid)
        for head in range(attention.weights.shape[1]):
            path = out_dir / f"block{attention.block:02d}_head{head}.pgm"
            write_pgm(path, heatmap(attention.weights[sample, head, local_query], attention.grid))
            paths.append(path)
    logger.info("wrote %d attention heatmaps to %s", len(paths), out_dir)
    return paths
