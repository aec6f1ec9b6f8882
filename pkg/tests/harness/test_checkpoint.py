"""Tests for checkpoint persistence."""

from pathlib import Path

import numpy as np
import pytest

from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import CheckpointError
from glyphweaver.harness.checkpoint import Checkpoint
from glyphweaver.harness.optim import Adam
from glyphweaver.models.config import PRESETS, ModelConfig
from glyphweaver.models.recognizer import GlyphRecognizer


@pytest.fixture
def model(micro_config: ModelConfig) -> GlyphRecognizer:
    """Fixture providing a micro recognizer with memory units."""
    model = GlyphRecognizer(micro_config, seed=3)
    model.attach_memory()
    return model


class TestCheckpoint:
    """Test cases for Checkpoint."""

    def test_save_load_save_is_identical(self, model: GlyphRecognizer, desk_vocab: Vocabulary,
                                         tmp_path: Path) -> None:
        """Test that a reloaded checkpoint serializes to the same bytes."""
        optimizer = Adam(model.named_parameters())
        rng = np.random.default_rng(9)
        rng.random(3)
        first = Checkpoint.capture(model, desk_vocab, 7, optimizer, rng, {"note": "x"}).save(tmp_path / "a.ckpt")
        loaded = Checkpoint.load(first)
        second = loaded.save(tmp_path / "b.ckpt")
        assert first.read_bytes() == second.read_bytes()
        assert loaded.step == 7
        assert loaded.extra == {"note": "x"}
        assert loaded.vocabulary == desk_vocab
        assert loaded.has_memory

    def test_capture_snaps_to_float32(self, model: GlyphRecognizer, desk_vocab: Vocabulary) -> None:
        """Test that the live model holds exactly the stored values after capture."""
        checkpoint = Checkpoint.capture(model, desk_vocab, 0)
        restored = Checkpoint.from_bytes(checkpoint.to_bytes())
        for name, values in model.state_dict().items():
            np.testing.assert_array_equal(restored.params[name], values)

    def test_build_model_predicts_identically(self, model: GlyphRecognizer, desk_vocab: Vocabulary,
                                              small_eval: GlyphDataset) -> None:
        """Test that a rebuilt model decodes exactly like the saved one."""
        checkpoint = Checkpoint.from_bytes(Checkpoint.capture(model, desk_vocab, 0).to_bytes())
        rebuilt = checkpoint.build_model()
        assert rebuilt.memory is not None
        assert rebuilt.predict(small_eval.images) == model.predict(small_eval.images)

    def test_restores_rng_and_optimizer(self, model: GlyphRecognizer, desk_vocab: Vocabulary) -> None:
        """Test that the data-order rng and Adam moments come back."""
        optimizer = Adam(model.named_parameters())
        optimizer.m["decoder.classifier.bias"][...] = 0.25
        rng = np.random.default_rng(4)
        checkpoint = Checkpoint.from_bytes(Checkpoint.capture(model, desk_vocab, 5, optimizer, rng).to_bytes())
        expected = rng.random(4)
        other = GlyphRecognizer(model.config, seed=11)
        other.attach_memory()
        other_optimizer = Adam(other.named_parameters())
        other_rng = np.random.default_rng(0)
        checkpoint.restore(other, other_optimizer, other_rng)
        np.testing.assert_array_equal(other_rng.random(4), expected)
        assert other_optimizer.step_count == 5
        np.testing.assert_array_equal(other_optimizer.m["decoder.classifier.bias"], 0.25)
        np.testing.assert_array_equal(other.memory.units.data, model.memory.units.data)

    def test_optimizer_without_memory_units(self, model: GlyphRecognizer, desk_vocab: Vocabulary) -> None:
        """Test that resuming into a model lacking memory units fails before any state is loaded."""
        checkpoint = Checkpoint.capture(model, desk_vocab, 2, Adam(model.named_parameters()))
        other = GlyphRecognizer(model.config, seed=11)
        before = other.state_dict()
        with pytest.raises(CheckpointError, match="memory units"):
            checkpoint.restore(other, Adam(other.named_parameters()))
        assert other.memory is None
        for name, values in other.state_dict().items():
            np.testing.assert_array_equal(values, before[name])

    def test_config_mismatch(self, model: GlyphRecognizer, desk_vocab: Vocabulary) -> None:
        """Test that a checkpoint refuses a model with another configuration."""
        checkpoint = Checkpoint.capture(model, desk_vocab, 0)
        with pytest.raises(CheckpointError):
            checkpoint.restore(GlyphRecognizer(PRESETS["desk"]))

    def test_corrupt_data(self, model: GlyphRecognizer, desk_vocab: Vocabulary) -> None:
        """Test that bad magic and truncated blocks are rejected."""
        data = Checkpoint.capture(model, desk_vocab, 0).to_bytes()
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(b"NOTACKPT" + data[8:])
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(data[:-4])
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(data + b"\x00" * 4)
