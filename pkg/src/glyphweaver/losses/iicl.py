"""A module containing the class memory units and the intra/inter consistency loss built on them."""

import math
from typing import Optional

import numpy as np

from glyphweaver.autograd.tensor import Tensor
from glyphweaver.corpus.vocabulary import BOS_ID, PAD_ID
from glyphweaver.errors import DimensionError, InputError
from glyphweaver.models.layers import Linear, Module, parameter


class MemoryBank(Module):
    """
    One trainable memory unit per vocabulary class, stored as a (V, C) matrix.
    Units are updated by the same optimizer steps as the model weights.
    """
    def __init__(self, units: np.ndarray) -> None:
        self.units = parameter(np.asarray(units, dtype=np.float64))

    @classmethod
    def random(cls, vocab_size: int, width: int, rng: np.random.Generator) -> "MemoryBank":
        return cls(rng.normal(0.0, 1.0 / math.sqrt(width), size=(vocab_size, width)))

    @classmethod
    def from_classifier(cls, classifier: Linear) -> "MemoryBank":
        """Start each unit at the classifier weight column of its class."""
        return cls(classifier.weight.data.T.copy())

    @property
    def vocab_size(self) -> int:
        return self.units.shape[0]

    @property
    def width(self) -> int:
        return self.units.shape[1]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.units.data).all())


def valid_positions(targets: np.ndarray) -> np.ndarray:
    """Supervised character positions: real characters and [EOS], never [PAD] or [BOS]."""
    targets = np.asarray(targets)
    return (targets != PAD_ID) & (targets != BOS_ID)


def gather_valid(features: Tensor, labels: np.ndarray, valid_mask: Optional[np.ndarray]) -> tuple[Tensor, np.ndarray]:
    """Flatten (B, T, C) features to the (N, C) rows marked valid, with their labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[:-1] != labels.shape:
        raise DimensionError(f"features {features.shape} do not match labels {labels.shape}")
    mask = valid_positions(labels) if valid_mask is None else np.asarray(valid_mask, dtype=bool)
    if mask.shape != labels.shape:
        raise DimensionError(f"valid mask {mask.shape} does not match labels {labels.shape}")
    rows = np.flatnonzero(mask.reshape(-1))
    flat = features.reshape(-1, features.shape[-1])
    return flat[rows], labels.reshape(-1)[rows]


def iicl(features: Tensor, labels: np.ndarray, bank: MemoryBank,
         valid_mask: Optional[np.ndarray] = None, delta: float = 1.0) -> Tensor:
    """
    Half the sum over valid positions of ||O_i - c_y||^2 / (sum_{j != y} ||O_i - c_j||^2 + delta).

    Args:
        features: Recognition features O (B, T, C)
        labels: Target ids (B, T)
        bank: Memory units (V, C)
        valid_mask: Positions to include; defaults to everything except [PAD] and [BOS]
        delta: Denominator offset

    Returns:
        Scalar tensor; exactly 0 when no position is valid
    """
    if delta < 0:
        raise InputError(f"delta must be non-negative, got {delta}")
    if features.shape[-1] != bank.width:
        raise DimensionError(f"features of width {features.shape[-1]} vs memory units of width {bank.width}")
    rows, row_labels = gather_valid(features, labels, valid_mask)
    if row_labels.size == 0:
        return Tensor(0.0)
    if row_labels.min() < 0 or row_labels.max() >= bank.vocab_size:
        raise InputError(f"label ids must lie in [0, {bank.vocab_size})")

    count, width = rows.shape
    diff = rows.reshape(count, 1, width) - bank.units.reshape(1, bank.vocab_size, width)
    distances = (diff * diff).sum(axis=-1)
    own = np.zeros((count, bank.vocab_size))
    own[np.arange(count), row_labels] = 1.0
    intra = (distances * own).sum(axis=-1)
    inter = (distances * (1.0 - own)).sum(axis=-1) + delta
    return (intra / inter).sum() * 0.5
