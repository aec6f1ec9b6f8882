"""A module containing greedy-decoding evaluation, word/character accuracy and split aggregation."""

import csv
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import humanize

from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary, decode_label, fold_case_36
from glyphweaver.errors import ConfigError, InputError
from glyphweaver.models.recognizer import GlyphRecognizer
from glyphweaver.runtime import worker_threads

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    batch_size: int = 64
    fold_case_36: bool = False
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"eval.batch_size must be positive, got {self.batch_size}")


@dataclass
class MetricsReport:
    """Evaluation results of one split, plus optional diagnostics filled in by the caller."""
    split: str
    sample_count: int
    correct_count: int
    char_accuracy: dict[str, float]
    labels: list[str] = field(default_factory=list, repr=False)
    predictions: list[str] = field(default_factory=list, repr=False)
    attention_locality: dict[str, float] = field(default_factory=dict)
    cluster_ratio: Optional[float] = None
    loss_curve: list[float] = field(default_factory=list, repr=False)
    folded: bool = False

    @property
    def word_accuracy(self) -> float:
        return self.correct_count / self.sample_count

    def summary(self) -> str:
        lines = [
            f"split {self.split}: {humanize.intcomma(self.sample_count)} samples",
            f"  word accuracy {self.word_accuracy:.4f} ({self.correct_count}/{self.sample_count})",
        ]
        for symbol, accuracy in sorted(self.char_accuracy.items()):
            lines.append(f"  char {symbol!r}: {accuracy:.4f}")
        for name, value in sorted(self.attention_locality.items()):
            lines.append(f"  locality {name}: {value:.4f}")
        if self.cluster_ratio is not None:
            lines.append(f"  intra/inter ratio {self.cluster_ratio:.4f}")
        return "\n".join(lines)

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["index", "label", "prediction", "correct"])
            for i, (label, prediction) in enumerate(zip(self.labels, self.predictions)):
                writer.writerow([i, label, prediction, int(self._normalize(label) == self._normalize(prediction))])

    def _normalize(self, text: str) -> str:
        return fold_case_36(text) if self.folded else text


def score(labels: Sequence[str], predictions: Sequence[str], fold: bool = False) -> tuple[int, dict[str, float]]:
    """
    Exact-match count and position-aligned per-class character accuracy.

    Returns:
        (correct word count, {symbol: fraction of its label occurrences predicted at the same position})
    """
    normalize = fold_case_36 if fold else (lambda text: text)
    correct = 0
    hits: dict[str, int] = defaultdict(int)
    totals: dict[str, int] = defaultdict(int)
    for label, prediction in zip(labels, predictions):
        label, prediction = normalize(label), normalize(prediction)
        correct += label == prediction
        for position, symbol in enumerate(label):
            totals[symbol] += 1
            hits[symbol] += position < len(prediction) and prediction[position] == symbol
    return correct, {symbol: hits[symbol] / totals[symbol] for symbol in totals}


def evaluate(model: GlyphRecognizer, dataset: GlyphDataset, vocab: Vocabulary,
             config: EvalConfig = EvalConfig()) -> MetricsReport:
    """
    Greedy-decode a split and score it.
    Batches run concurrently; results are reduced in batch order, so the report does not
    depend on the thread count.
    """
    if len(dataset) == 0:
        raise InputError(f"cannot evaluate the empty split {dataset.name!r}")
    batches = [range(start, min(start + config.batch_size, len(dataset)))
               for start in range(0, len(dataset), config.batch_size)]

    def decode(indices: range) -> list[str]:
        return [decode_label(ids, vocab) for ids in model.predict(dataset.images[indices.start:indices.stop])]

    with ThreadPoolExecutor(max_workers=config.threads or worker_threads()) as pool:
        predictions = [text for chunk in pool.map(decode, batches) for text in chunk]
    correct, char_accuracy = score(dataset.labels, predictions, config.fold_case_36)
    report = MetricsReport(dataset.name, len(dataset), correct, char_accuracy, list(dataset.labels), predictions,
                           folded=config.fold_case_36)
    logger.info("%s: word accuracy %.4f on %s samples", dataset.name, report.word_accuracy,
                humanize.intcomma(len(dataset)))
    return report


def weighted_average(reports: Sequence[MetricsReport]) -> float:
    """Sample-count-weighted mean word accuracy over several splits."""
    total = sum(r.sample_count for r in reports)
    if total == 0:
        raise InputError("weighted average over no samples")
    return sum(r.correct_count for r in reports) / total
