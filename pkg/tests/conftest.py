"""Shared fixtures: the micro model preset, the desk vocabulary and a small rendered corpus."""

from dataclasses import replace

import numpy as np
import pytest

from glyphweaver.corpus.generator import CorpusSpec, GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.harness.trainer import TrainConfig
from glyphweaver.models.config import PRESETS, ModelConfig


@pytest.fixture
def rng() -> np.random.Generator:
    """Fixture providing a fixed-seed generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def micro_config() -> ModelConfig:
    """Fixture providing the smallest model preset (16x32 images, 4 decoder steps)."""
    return PRESETS["micro"]


@pytest.fixture
def desk_vocab() -> Vocabulary:
    """Fixture providing the 16-symbol desk vocabulary."""
    return Vocabulary.desk()


@pytest.fixture
def small_spec() -> CorpusSpec:
    """Fixture providing a corpus spec matching the micro image size."""
    return CorpusSpec(train_count=16, eval_count=8, image_size=(16, 32), max_len=3)


@pytest.fixture
def small_train(small_spec: CorpusSpec) -> GlyphDataset:
    """Fixture providing the rendered 16-sample train split."""
    return GlyphDataset.render(small_spec, "train")


@pytest.fixture
def small_eval(small_spec: CorpusSpec) -> GlyphDataset:
    """Fixture providing the rendered 8-sample eval split."""
    return GlyphDataset.render(small_spec, "eval")


@pytest.fixture
def quick_train() -> TrainConfig:
    """Fixture providing a two-epoch, batch-of-8 training config."""
    return replace(TrainConfig(), epochs=2, batch_size=8, lr_reference_batch=8, base_lr=1e-3, log_every=0)
