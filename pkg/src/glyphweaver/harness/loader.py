"""A module containing the BatchLoader that prepares training batches on a reader thread."""

import hashlib
import logging
import math
import queue
import threading
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    indices: np.ndarray
    images: np.ndarray
    targets: np.ndarray

    @property
    def digest(self) -> str:
        """Short content hash of the sample order and targets, used to compare data order across runs."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.indices, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.targets, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.indices)


class BatchLoader:
    """
    Streams shuffled batches of a dataset.
    The epoch permutation is drawn on the calling thread from the data-order rng, so the
    order depends only on that rng; a reader thread assembles the batches ahead of the
    consumer and hands them over through a bounded queue, ending with a None sentinel.
    Errors raised on the reader thread are re-raised on the consumer side.
    """
    def __init__(self, dataset: GlyphDataset, vocab: Vocabulary, max_len: int, batch_size: int,
                 rng: np.random.Generator, prefetch: int = 4) -> None:
        """
        Initialize the loader.

        Args:
            dataset: Split to iterate
            vocab: Vocabulary used to encode labels
            max_len: Decoder length T of the encoded targets
            batch_size: Samples per batch; the last batch of an epoch may be smaller
            rng: Data-order generator, advanced once per epoch
            prefetch: Maximum number of prepared batches waiting in the queue
        """
        if batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {batch_size}")
        self.dataset = dataset
        self.vocab = vocab
        self.max_len = max_len
        self.batch_size = batch_size
        self.rng = rng
        self.prefetch = prefetch

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(len(self.dataset) / self.batch_size)

    def epoch_order(self) -> np.ndarray:
        return self.rng.permutation(len(self.dataset))

    def iterate_epoch(self) -> Iterator[Batch]:
        """Yield the batches of one epoch in a deterministic order."""
        order = self.epoch_order()
        batch_queue: "queue.Queue[Optional[Union[Batch, BaseException]]]" = queue.Queue(maxsize=self.prefetch)
        stop_event = threading.Event()
        reader = threading.Thread(target=self._reader_worker, args=(order, batch_queue, stop_event), daemon=True)
        reader.start()
        try:
            while True:
                item = batch_queue.get()
                if item is None:
                    break
                if isinstance(item, BaseException):
                    raise item
                yield item
        finally:
            stop_event.set()
            # Unblock a reader waiting on a full queue.
            while reader.is_alive():
                try:
                    batch_queue.get_nowait()
                except queue.Empty:
                    reader.join(timeout=0.05)

    def _reader_worker(self, order: np.ndarray, batch_queue: queue.Queue, stop_event: threading.Event) -> None:
        try:
            for start in range(0, len(order), self.batch_size):
                if stop_event.is_set():
                    return
                indices = order[start:start + self.batch_size]
                images, targets = self.dataset.batch(indices, self.vocab, self.max_len)
                batch_queue.put(Batch(indices, images, targets))
            batch_queue.put(None)
        except Exception as e:
            logger.error("batch reader failed: %s", e)
            batch_queue.put(e)
