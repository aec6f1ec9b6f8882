"""Tests for the feature-cluster diagnostics."""

import csv
from pathlib import Path

import numpy as np
import pytest

from glyphweaver.analyzers.cluster_analyzer import cluster_metrics, collect_features, write_feature_dump
from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import EOS_ID, Vocabulary
from glyphweaver.errors import InputError
from glyphweaver.losses.iicl import valid_positions
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.recognizer import GlyphRecognizer


class TestClusterMetrics:
    """Test cases for cluster_metrics."""

    def test_tight_clusters(self) -> None:
        """Test a zero ratio when every feature sits on its class mean."""
        features = np.array([[0.0, 0.0], [0.0, 0.0], [3.0, 4.0], [3.0, 4.0]])
        report = cluster_metrics(features, np.array([3, 3, 4, 4]))
        assert report.ratio == 0.0
        assert report.inter == {3: 5.0, 4: 5.0}

    def test_ratio_value(self) -> None:
        """Test intra/inter on two spread clusters."""
        features = np.array([[-1.0, 0.0], [1.0, 0.0], [9.0, 0.0], [11.0, 0.0]])
        report = cluster_metrics(features, np.array([3, 3, 4, 4]))
        assert report.intra == {3: 1.0, 4: 1.0}
        assert report.ratio == pytest.approx(0.1)

    def test_coincident_means_flagged(self) -> None:
        """Test that classes sharing a mean are flagged rather than divided by zero."""
        features = np.array([[1.0], [-1.0], [2.0], [-2.0], [5.0], [7.0]])
        report = cluster_metrics(features, np.array([3, 3, 4, 4, 5, 5]))
        assert report.flagged_pairs == [(3, 4)]
        assert report.ratio == pytest.approx(1.0 / 6.0)
        assert "coincident" in report.summary()

    def test_rare_classes_skipped(self) -> None:
        """Test that single-sample classes are listed as skipped."""
        features = np.array([[0.0], [1.0], [5.0]])
        report = cluster_metrics(features, np.array([3, 3, 4]))
        assert report.skipped == [4]
        assert np.isnan(report.ratio)

    def test_memory_units(self) -> None:
        """Test the nearest-unit fraction against given memory units."""
        features = np.array([[0.1, 0.0], [0.0, 0.1], [1.0, 0.9], [0.2, 0.1]])
        labels = np.array([0, 0, 1, 1])
        units = np.array([[0.0, 0.0], [1.0, 1.0]])
        report = cluster_metrics(features, labels, units)
        assert report.nearest_unit_fraction == pytest.approx(0.75)

    def test_shape_mismatch(self) -> None:
        """Test that features and labels must align."""
        with pytest.raises(InputError):
            cluster_metrics(np.zeros((3, 2)), np.zeros(2, dtype=int))


class TestCollectFeatures:
    """Test cases for collect_features and write_feature_dump."""

    def test_supervised_positions_only(self, micro_config: ModelConfig, small_eval: GlyphDataset,
                                       desk_vocab: Vocabulary, tmp_path: Path) -> None:
        """Test one feature per label character plus [EOS], and the CSV dump."""
        model = GlyphRecognizer(micro_config)
        features, labels = collect_features(model, small_eval, desk_vocab, batch_size=3)
        _, targets = small_eval.batch(range(len(small_eval)), desk_vocab, micro_config.max_label_len)
        assert features.shape == (int(valid_positions(targets).sum()), micro_config.fused_width)
        assert (labels == EOS_ID).sum() == len(small_eval)
        write_feature_dump(tmp_path / "features.csv", features, labels, desk_vocab)
        with open(tmp_path / "features.csv", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == len(labels) + 1
        assert rows[0][:3] == ["label", "symbol", "f0"]

    def test_empty_split(self, micro_config: ModelConfig, desk_vocab: Vocabulary) -> None:
        """Test that an empty split has no features."""
        with pytest.raises(InputError):
            collect_features(GlyphRecognizer(micro_config), GlyphDataset.from_samples([]), desk_vocab)
