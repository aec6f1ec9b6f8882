"""Tests for the threaded batch loader."""

import numpy as np
import pytest

from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import ConfigError, InputError
from glyphweaver.harness.loader import BatchLoader


class TestBatchLoader:
    """Test cases for BatchLoader."""

    def test_epoch_covers_every_sample(self, small_train: GlyphDataset, desk_vocab: Vocabulary) -> None:
        """Test batch sizes and that every index appears once per epoch."""
        loader = BatchLoader(small_train, desk_vocab, 4, 5, np.random.default_rng(0))
        batches = list(loader.iterate_epoch())
        assert [len(b) for b in batches] == [5, 5, 5, 1]
        assert loader.batches_per_epoch == 4
        assert sorted(np.concatenate([b.indices for b in batches]).tolist()) == list(range(16))
        assert batches[0].images.shape == (5, 16, 32, 1)
        assert batches[0].targets.shape == (5, 4)

    def test_order_depends_only_on_rng(self, small_train: GlyphDataset, desk_vocab: Vocabulary) -> None:
        """Test that equal rng seeds give equal batch digests and epochs differ."""
        def digests(seed: int) -> list[list[str]]:
            loader = BatchLoader(small_train, desk_vocab, 4, 4, np.random.default_rng(seed), prefetch=1)
            return [[b.digest for b in loader.iterate_epoch()] for _ in range(2)]

        first, second = digests(7), digests(7)
        assert first == second
        assert first[0] != first[1]

    def test_early_stop(self, small_train: GlyphDataset, desk_vocab: Vocabulary) -> None:
        """Test that abandoning an epoch stops the reader thread."""
        loader = BatchLoader(small_train, desk_vocab, 4, 1, np.random.default_rng(0), prefetch=1)
        epoch = loader.iterate_epoch()
        assert len(next(epoch)) == 1
        epoch.close()

    def test_reader_errors_surface(self, small_train: GlyphDataset, desk_vocab: Vocabulary) -> None:
        """Test that an encoding failure on the reader thread reaches the consumer."""
        loader = BatchLoader(small_train, desk_vocab, 2, 4, np.random.default_rng(0))
        with pytest.raises(InputError):
            list(loader.iterate_epoch())

    def test_invalid_batch_size(self, small_train: GlyphDataset, desk_vocab: Vocabulary) -> None:
        """Test that empty batches are rejected."""
        with pytest.raises(ConfigError):
            BatchLoader(small_train, desk_vocab, 4, 0, np.random.default_rng(0))
