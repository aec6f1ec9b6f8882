"""Tests for the glyph stroke prototypes."""

import numpy as np
import pytest

from glyphweaver.corpus.glyphs import CONFUSABLE_PAIRS, jaccard, pair_overlaps, prototype_segments, strokes_of
from glyphweaver.corpus.vocabulary import DESK_SYMBOLS
from glyphweaver.errors import VocabError


class TestGlyphs:
    """Test cases for the prototypes and their overlaps."""

    def test_every_desk_symbol_has_strokes(self) -> None:
        """Test that all 16 desk classes have distinct prototypes."""
        strokes = [strokes_of(symbol) for symbol in DESK_SYMBOLS]
        assert len(strokes) == 16
        assert len(set(strokes)) == 16

    def test_confusable_pairs_share_most_strokes(self) -> None:
        """Test that at least three designated pairs share 70% or more of their strokes."""
        assert len(CONFUSABLE_PAIRS) >= 3
        for first, second in CONFUSABLE_PAIRS:
            assert jaccard(first, second) >= 0.7

    def test_other_pairs_overlap_less(self) -> None:
        """Test that no undesignated pair reaches the confusable overlap."""
        designated = {frozenset(pair) for pair in CONFUSABLE_PAIRS}
        for pair, overlap in pair_overlaps(DESK_SYMBOLS).items():
            if frozenset(pair) not in designated:
                assert overlap < 0.7, pair

    def test_segments_in_unit_box(self) -> None:
        """Test the (S, 2, 2) segment layout inside the glyph box."""
        segments = prototype_segments("Z")
        assert segments.shape == (6, 2, 2)
        assert segments.min() >= 0.0 and segments.max() <= 1.0

    def test_unknown_symbol(self) -> None:
        """Test that symbols without a prototype raise VocabError."""
        with pytest.raises(VocabError):
            strokes_of("a")

    def test_jaccard_identity(self) -> None:
        """Test that a prototype fully overlaps itself."""
        assert jaccard("O", "O") == 1.0
        assert np.isclose(jaccard("O", "Q"), 8 / 9)
