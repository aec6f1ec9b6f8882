"""Desk-scale training experiments: overfit smoke runs and the controlled ablation comparisons."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from glyphweaver.analyzers.attention_analyzer import capture_attention, mean_decayed_locality
from glyphweaver.analyzers.cluster_analyzer import cluster_metrics, collect_features
from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import decode_label
from glyphweaver.harness.ablation import AblationTable, run_ablation
from glyphweaver.harness.checkpoint import Checkpoint
from glyphweaver.harness.evaluator import evaluate
from glyphweaver.harness.trainer import Trainer
from glyphweaver.losses.schedule import LossConfig
from glyphweaver.models.recognizer import GlyphRecognizer
from glyphweaver.settings import Settings, build_settings

SEEDS = [0, 1, 2]
LOCALITY_SAMPLES = 100


@pytest.fixture(scope="module")
def desk() -> Settings:
    """Fixture providing the desk preset: 8k train and 1k eval samples at maximum distortion."""
    return build_settings({}, variant="desk")


@pytest.fixture(scope="module")
def desk_splits(desk: Settings) -> tuple[GlyphDataset, GlyphDataset]:
    """Fixture providing the rendered desk train and eval splits."""
    return GlyphDataset.render(desk.corpus, "train"), GlyphDataset.render(desk.corpus, "eval")


@pytest.fixture(scope="module")
def components(desk: Settings, desk_splits: tuple[GlyphDataset, GlyphDataset],
               tmp_path_factory: pytest.TempPathFactory) -> tuple[AblationTable, Path]:
    """Fixture providing the three-seed components table and the directory holding its checkpoints."""
    out_dir = tmp_path_factory.mktemp("components")
    table = run_ablation("components", desk.model, desk.train, desk.loss, desk.vocabulary, *desk_splits,
                         seeds=SEEDS, out_dir=out_dir, eval_config=desk.eval)
    return table, out_dir


def final_model(out_dir: Path, cell: str, seed: int, epochs: int) -> GlyphRecognizer:
    return Checkpoint.load(out_dir / "components" / f"{cell}-seed{seed}" / f"epoch-{epochs:03d}.ckpt").build_model()


@pytest.mark.slow
@pytest.mark.desk
class TestOverfit:
    """Test cases for memorizing tiny training sets."""

    def test_single_sample(self, desk: Settings) -> None:
        """Test that one sample is fitted to a loss below 0.01 in 200 steps and decoded back exactly."""
        spec = replace(desk.corpus, train_count=1)
        sample = GlyphDataset.render(spec, "train")
        train = replace(desk.train, epochs=200, batch_size=1, lr_reference_batch=1, base_lr=2e-3, log_every=0)
        result = Trainer(desk.model, train, LossConfig(contrastive="none"), desk.vocabulary).fit(sample)
        assert len(result.history) == 200
        assert result.final_loss < 0.01
        predicted = result.model.predict(sample.images)
        assert decode_label(predicted[0], desk.vocabulary) == sample.labels[0]

    def test_sixteen_samples(self, desk: Settings) -> None:
        """Test that the desk model reaches full word accuracy on a 16-sample corpus within 300 steps."""
        spec = replace(desk.corpus, train_count=16)
        samples = GlyphDataset.render(spec, "train")
        train = replace(desk.train, epochs=300, batch_size=16, lr_reference_batch=16, base_lr=1e-3, log_every=0)
        result = Trainer(desk.model, train, desk.loss, desk.vocabulary).fit(samples)
        assert len(result.history) == 300
        assert evaluate(result.model, samples, desk.vocabulary, desk.eval).word_accuracy == 1.0


@pytest.mark.slow
@pytest.mark.desk
class TestDeskComparisons:
    """Test cases for the three-seed comparisons between model variants on the desk corpus."""

    def test_components_improve_on_baseline(self, components: tuple[AblationTable, Path]) -> None:
        """Test that each component helps and the full model gains at least one accuracy point."""
        table, _ = components
        baseline = table.row("baseline").mean
        assert table.row("+CACE").mean >= baseline
        assert table.row("+I2CL").mean >= baseline
        assert table.row("full").mean > baseline
        assert table.row("full").mean - baseline >= 0.01

    def test_memory_units_beat_plain_contrast(self, desk: Settings,
                                              desk_splits: tuple[GlyphDataset, GlyphDataset]) -> None:
        """Test that the memory-unit loss scores at least as well as the supervised contrastive baseline."""
        table = run_ablation("contrastive", desk.model, desk.train, desk.loss, desk.vocabulary, *desk_splits,
                             seeds=SEEDS, eval_config=desk.eval)
        assert table.row("iicl").mean >= table.row("cc").mean

    def test_decay_makes_attention_local(self, desk: Settings, desk_splits: tuple[GlyphDataset, GlyphDataset],
                                         components: tuple[AblationTable, Path]) -> None:
        """Test that the trained full model attends more locally than the undecayed baseline."""
        _, out_dir = components
        images = desk_splits[1].images[:LOCALITY_SAMPLES]
        blocks = [n for n in range(1, sum(desk.model.stage_depths) + 1) if desk.model.uses_decay(n)]
        full = final_model(out_dir, "full", SEEDS[0], desk.train.epochs)
        baseline = final_model(out_dir, "baseline", SEEDS[0], desk.train.epochs)
        assert mean_decayed_locality(capture_attention(full, images), blocks) < mean_decayed_locality(
            capture_attention(baseline, images), blocks)

    def test_memory_units_separate_classes(self, desk: Settings, desk_splits: tuple[GlyphDataset, GlyphDataset],
                                           components: tuple[AblationTable, Path]) -> None:
        """Test tighter clusters with memory units and that most characters sit nearest their own unit."""
        table, out_dir = components
        assert table.row("full").mean_ratio < table.row("+CACE").mean_ratio
        model = final_model(out_dir, "full", SEEDS[0], desk.train.epochs)
        features, labels = collect_features(model, desk_splits[1], desk.vocabulary, desk.eval.batch_size)
        report = cluster_metrics(features, labels, model.memory.units.numpy())
        assert report.nearest_unit_fraction >= 0.9
        assert np.isfinite(report.ratio)
