"""A module containing feature-cluster diagnostics for the recognition features O."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from glyphweaver.autograd.tensor import no_grad
from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import InputError
from glyphweaver.losses.iicl import valid_positions
from glyphweaver.models.recognizer import GlyphRecognizer

logger = logging.getLogger(__name__)


@dataclass
class ClusterReport:
    """
    Per-class spread and separation.
    intra[k] is the mean distance of class-k features to their mean; inter[k] the distance
    from that mean to the nearest other class mean. Classes with inter == 0 are not part of
    the ratio and show up in flagged_pairs instead.
    """
    intra: dict[int, float]
    inter: dict[int, float]
    ratio: float
    flagged_pairs: list[tuple[int, int]] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)
    nearest_unit_fraction: Optional[float] = None
    unit_intra: dict[int, float] = field(default_factory=dict)
    unit_inter: dict[int, float] = field(default_factory=dict)

    def summary(self, vocab: Optional[Vocabulary] = None) -> str:
        name = (lambda k: vocab.symbol_of(k)) if vocab is not None else str
        lines = [f"mean intra/inter ratio {self.ratio:.4f} over {len(self.intra) - len(self.flagged_classes)} classes"]
        for k in sorted(self.intra):
            lines.append(f"  {name(k)}: intra {self.intra[k]:.4f} inter {self.inter[k]:.4f}")
        if self.flagged_pairs:
            lines.append("  coincident class means: " + ", ".join(f"{name(a)}/{name(b)}" for a, b in self.flagged_pairs))
        if self.skipped:
            lines.append("  skipped (fewer than 2 samples): " + ", ".join(name(k) for k in self.skipped))
        if self.nearest_unit_fraction is not None:
            lines.append(f"  nearest memory unit is own class for {self.nearest_unit_fraction:.2%} of characters")
        return "\n".join(lines)

    @property
    def flagged_classes(self) -> set[int]:
        return {k for pair in self.flagged_pairs for k in pair}


def cluster_metrics(features: np.ndarray, labels: np.ndarray, units: Optional[np.ndarray] = None,
                    min_count: int = 2) -> ClusterReport:
    """
    Measure how tightly each class clusters and how far class centers sit apart.

    Args:
        features: (N, C) character features
        labels: (N,) class ids
        units: Optional (V, C) memory units; adds own-unit vs nearest-other-unit statistics
        min_count: Classes with fewer samples are skipped and listed

    Returns:
        ClusterReport
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or len(features) != len(labels):
        raise InputError(f"features {features.shape} do not match labels {labels.shape}")
    classes, counts = np.unique(labels, return_counts=True)
    kept = [int(k) for k, n in zip(classes, counts) if n >= min_count]
    skipped = [int(k) for k, n in zip(classes, counts) if n < min_count]
    means = {k: features[labels == k].mean(axis=0) for k in kept}
    intra = {k: float(np.linalg.norm(features[labels == k] - means[k], axis=1).mean()) for k in kept}
    inter: dict[int, float] = {}
    flagged: list[tuple[int, int]] = []
    for k in kept:
        distances = {j: float(np.linalg.norm(means[k] - means[j])) for j in kept if j != k}
        inter[k] = min(distances.values()) if distances else float("inf")
        flagged += [(k, j) for j, d in distances.items() if d == 0.0 and k < j]
    flagged_classes = {k for pair in flagged for k in pair}
    ratios = [intra[k] / inter[k] for k in kept if k not in flagged_classes and np.isfinite(inter[k])]
    report = ClusterReport(intra, inter, float(np.mean(ratios)) if ratios else float("nan"), flagged, skipped)

    if units is not None:
        distances = np.linalg.norm(features[:, None, :] - np.asarray(units)[None], axis=-1)
        own = distances[np.arange(len(labels)), labels]
        others = distances.copy()
        others[np.arange(len(labels)), labels] = np.inf
        nearest_other = others.min(axis=1)
        report.nearest_unit_fraction = float(np.mean(own < nearest_other)) if len(labels) else None
        for k in kept:
            mask = labels == k
            report.unit_intra[k] = float(own[mask].mean())
            report.unit_inter[k] = float(nearest_other[mask].mean())
    if flagged:
        logger.warning("class pairs with coincident means: %s", flagged)
    return report


def collect_features(model: GlyphRecognizer, dataset: GlyphDataset, vocab: Vocabulary,
                     batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forced features O and labels at every supervised position (characters and [EOS])."""
    max_len = model.config.max_label_len
    features, labels = [], []
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            images, targets = dataset.batch(range(start, min(start + batch_size, len(dataset))), vocab, max_len)
            output = model.forward(images, targets)
            mask = valid_positions(targets)
            features.append(output.features.data[mask])
            labels.append(targets[mask])
    if not features:
        raise InputError(f"split {dataset.name!r} is empty")
    return np.concatenate(features), np.concatenate(labels)


def write_feature_dump(path: Union[str, Path], features: np.ndarray, labels: np.ndarray, vocab: Vocabulary) -> None:
    """CSV with one row per character: id, symbol, then the feature vector."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["label", "symbol", *(f"f{i}" for i in range(features.shape[1]))])
        for label, row in zip(labels, features):
            writer.writerow([int(label), vocab.symbol_of(int(label)), *(f"{v:.8g}" for v in row)])
