"""A module containing the batch-local supervised contrastive loss used as an ablation baseline."""

from typing import Optional

import numpy as np

from glyphweaver.autograd.tensor import MASK_VALUE, Tensor, log_softmax_lastdim
from glyphweaver.errors import InputError
from glyphweaver.losses.iicl import gather_valid

DEFAULT_TEMPERATURE = 0.1


def cc_loss_baseline(features: Tensor, labels: np.ndarray, valid_mask: Optional[np.ndarray] = None,
                     temperature: float = DEFAULT_TEMPERATURE) -> Tensor:
    """
    Supervised contrastive loss over L2-normalized character features of one batch.
    Positives share a label; an anchor without positives contributes nothing and the
    mean runs over anchors that have at least one.
    """
    if temperature <= 0:
        raise InputError(f"temperature must be positive, got {temperature}")
    rows, row_labels = gather_valid(features, labels, valid_mask)
    count = row_labels.size
    if count < 2:
        raise InputError(f"contrastive loss needs at least 2 valid characters, got {count}")

    normed = rows / ((rows * rows).sum(axis=-1, keepdims=True) + 1e-12).sqrt()
    self_mask = np.diag(np.full(count, MASK_VALUE))
    log_prob = log_softmax_lastdim(normed @ normed.transpose() * (1.0 / temperature) + self_mask)

    positives = (row_labels[:, None] == row_labels[None, :]).astype(np.float64)
    np.fill_diagonal(positives, 0.0)
    per_anchor = positives.sum(axis=1)
    anchors = per_anchor > 0
    if not anchors.any():
        return Tensor(0.0)
    weights = np.where(anchors, 1.0 / np.maximum(per_anchor, 1.0), 0.0)[:, None] * positives
    return -(log_prob * weights).sum() * (1.0 / anchors.sum())
