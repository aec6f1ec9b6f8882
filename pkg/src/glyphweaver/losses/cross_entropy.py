"""A module containing the masked token cross-entropy."""

import numpy as np

from glyphweaver.autograd.tensor import Tensor, log_softmax_lastdim, pick_lastdim
from glyphweaver.corpus.vocabulary import PAD_ID
from glyphweaver.errors import DimensionError, InputError


def cross_entropy(logits: Tensor, targets: np.ndarray, pad_id: int = PAD_ID) -> Tensor:
    """
    Mean negative log-likelihood over the non-pad positions.

    Args:
        logits: (B, T, V) unnormalized scores
        targets: (B, T) integer ids; positions equal to pad_id are ignored
        pad_id: Padding id

    Returns:
        Scalar tensor
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(f"logits {logits.shape} do not match targets {targets.shape}")
    weights = (targets != pad_id).astype(np.float64)
    count = weights.sum()
    if count == 0:
        raise InputError("cross entropy is undefined for a batch made only of padding")
    picked = pick_lastdim(log_softmax_lastdim(logits), targets)
    return -(picked * weights).sum() * (1.0 / count)
