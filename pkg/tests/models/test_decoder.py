"""Tests for the recognition decoder."""

import numpy as np
import pytest

from glyphweaver.autograd.tensor import MASK_VALUE, Tensor
from glyphweaver.corpus.vocabulary import BOS_ID, EOS_ID, PAD_ID
from glyphweaver.errors import DimensionError, InputError
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.decoder import RecognitionDecoder, causal_mask


@pytest.fixture
def decoder(micro_config: ModelConfig) -> RecognitionDecoder:
    """Fixture providing a decoder for the micro preset (T=4, C=16)."""
    return RecognitionDecoder(micro_config, np.random.default_rng(0))


@pytest.fixture
def memory() -> Tensor:
    """Fixture providing encoder tokens for a batch of two."""
    return Tensor(np.random.default_rng(1).normal(size=(2, 7, 16)))


class TestRecognitionDecoder:
    """Test cases for RecognitionDecoder."""

    def test_causal_mask(self) -> None:
        """Test that only later positions are masked."""
        mask = causal_mask(3)
        assert mask[0, 1] == MASK_VALUE and mask[1, 2] == MASK_VALUE
        assert mask[1, 0] == 0.0 and mask[2, 2] == 0.0

    def test_output_shapes(self, decoder: RecognitionDecoder, memory: Tensor) -> None:
        """Test that features are (B, T, C) and logits (B, T, V)."""
        out = decoder(memory, np.array([[5, 6, EOS_ID, PAD_ID], [7, EOS_ID, PAD_ID, PAD_ID]]))
        assert out.features.shape == (2, 4, 16)
        assert out.logits.shape == (2, 4, 19)

    def test_teacher_inputs(self, decoder: RecognitionDecoder) -> None:
        """Test the right shift behind [BOS] and padding to T."""
        inputs = decoder.teacher_inputs(np.array([[5, 6, EOS_ID]]))
        assert inputs.tolist() == [[BOS_ID, 5, 6, EOS_ID]]

    def test_empty_label_inputs(self, decoder: RecognitionDecoder) -> None:
        """Test that an empty label is supervised with [EOS] at the first step."""
        targets = decoder.pad_targets(np.array([[EOS_ID]]))
        assert targets.tolist() == [[EOS_ID, PAD_ID, PAD_ID, PAD_ID]]
        assert decoder.teacher_inputs(targets)[0, :2].tolist() == [BOS_ID, EOS_ID]

    def test_targets_too_long(self, decoder: RecognitionDecoder) -> None:
        """Test that targets longer than T are rejected."""
        with pytest.raises(InputError):
            decoder.pad_targets(np.full((1, 5), 3))

    def test_target_ids_in_range(self, decoder: RecognitionDecoder) -> None:
        """Test that ids outside the vocabulary are rejected."""
        with pytest.raises(InputError):
            decoder.pad_targets(np.array([[19, EOS_ID]]))

    def test_memory_batch_mismatch(self, decoder: RecognitionDecoder) -> None:
        """Test that memory and inputs must share the batch size."""
        with pytest.raises(DimensionError):
            decoder.forward(Tensor(np.zeros((3, 7, 16))), np.array([[BOS_ID], [BOS_ID]]))

    def test_causality(self, decoder: RecognitionDecoder, memory: Tensor) -> None:
        """Test that changing input p leaves every earlier output unchanged."""
        inputs = np.array([[BOS_ID, 5, 6, 7], [BOS_ID, 8, 9, 10]])
        changed = inputs.copy()
        changed[:, 2] = 12
        before = decoder.forward(memory, inputs).logits.data
        after = decoder.forward(memory, changed).logits.data
        np.testing.assert_allclose(after[:, :2], before[:, :2], atol=1e-12)
        assert not np.allclose(after[:, 2:], before[:, 2:])

    def test_greedy_decoding(self, decoder: RecognitionDecoder, memory: Tensor) -> None:
        """Test that greedy output never contains [PAD], [BOS] or [EOS] and fits in T."""
        sequences = decoder.decode_greedy(memory)
        assert len(sequences) == 2
        for sequence in sequences:
            assert len(sequence) <= 4
            assert all(3 <= token < 19 for token in sequence)

    def test_greedy_stops_at_eos(self, decoder: RecognitionDecoder, memory: Tensor) -> None:
        """Test that a classifier favouring [EOS] yields empty sequences."""
        decoder.classifier.bias.data[EOS_ID] = 1e6
        assert decoder.decode_greedy(memory) == [[], []]
