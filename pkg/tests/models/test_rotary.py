"""Tests for the 2D axial rotary position encoding."""

import math

import numpy as np
import pytest

from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import ConfigError, DimensionError
from glyphweaver.models.decay import TokenGrid
from glyphweaver.models.rotary import RotaryTable, apply_rotary, pair_logits, rotate_pairs


@pytest.fixture
def table() -> RotaryTable:
    """Fixture providing a table for a 3x4 grid and head dim 8."""
    return RotaryTable(TokenGrid(3, 4), 8, 100.0)


class TestRotaryTable:
    """Test cases for RotaryTable."""

    def test_unit_circle(self, table: RotaryTable) -> None:
        """Test that every (cos, sin) pair lies on the unit circle."""
        np.testing.assert_allclose(table.cos ** 2 + table.sin ** 2, 1.0, atol=1e-12)
        assert table.cos.shape == (12, 4)

    @pytest.mark.parametrize("head_dim", [3, 6])
    def test_axial_halves_must_be_even(self, head_dim: int) -> None:
        """Test that head dims not split into two even halves are rejected."""
        with pytest.raises(ConfigError):
            RotaryTable(TokenGrid(2, 2), head_dim)


class TestApplyRotary:
    """Test cases for apply_rotary and pair_logits."""

    def test_origin_is_identity(self, table: RotaryTable) -> None:
        """Test that the token at (0, 0) is not rotated."""
        x = np.random.default_rng(0).normal(size=(1, 1, 12, 8))
        out = apply_rotary(Tensor(x), table).data
        np.testing.assert_array_equal(out[..., 0, :], x[..., 0, :])

    def test_quarter_turn(self) -> None:
        """Test that (1, 0) turns to (0, 1), and to (0, -1) for the conjugate angle."""
        pair = np.array([[1.0, 0.0]])
        cos, sin = np.array([[math.cos(math.pi / 2)]]), np.array([[math.sin(math.pi / 2)]])
        np.testing.assert_allclose(rotate_pairs(pair, cos, sin), [[0.0, 1.0]], atol=1e-15)
        np.testing.assert_allclose(rotate_pairs(pair, cos, -sin), [[0.0, -1.0]], atol=1e-15)

    def test_norm_preserved(self, table: RotaryTable) -> None:
        """Test that every token keeps its norm."""
        x = np.random.default_rng(1).normal(size=(2, 2, 12, 8))
        out = apply_rotary(Tensor(x), table).data
        np.testing.assert_allclose(np.linalg.norm(out, axis=-1), np.linalg.norm(x, axis=-1), atol=1e-10)

    def test_conjugate_undoes_rotation(self, table: RotaryTable) -> None:
        """Test that rotating by +angle then -angle recovers the input."""
        x = Tensor(np.random.default_rng(2).normal(size=(1, 2, 12, 8)))
        back = apply_rotary(apply_rotary(x, table), table, conjugate=True)
        np.testing.assert_allclose(back.data, x.data, atol=1e-12)

    @pytest.mark.parametrize("height,width,head_dim,base", [(3, 4, 8, 100.0), (4, 8, 8, 10000.0), (4, 8, 16, 10000.0)])
    def test_logits_depend_only_on_offset(self, height: int, width: int, head_dim: int, base: float) -> None:
        """Test that translating a query/key pair by the same grid offset leaves the logit unchanged."""
        rng = np.random.default_rng(3)
        grid = TokenGrid(height, width)
        table = RotaryTable(grid, head_dim, base)
        q = np.broadcast_to(rng.normal(size=head_dim), (1, 1, grid.length, head_dim))
        k = np.broadcast_to(rng.normal(size=head_dim), (1, 1, grid.length, head_dim))
        logits = pair_logits(apply_rotary(Tensor(q), table), apply_rotary(Tensor(k), table, conjugate=True)).data[0, 0]
        xs, ys = grid.coords
        by_offset: dict[tuple[int, int], float] = {}
        for i in range(grid.length):
            for j in range(grid.length):
                offset = (int(xs[i] - xs[j]), int(ys[i] - ys[j]))
                reference = by_offset.setdefault(offset, logits[i, j])
                assert abs(logits[i, j] - reference) < 1e-10

    def test_odd_head_dim(self, table: RotaryTable) -> None:
        """Test that an odd head dim is a config error."""
        with pytest.raises(ConfigError):
            apply_rotary(Tensor(np.ones((1, 1, 12, 3))), table)

    def test_length_mismatch(self, table: RotaryTable) -> None:
        """Test that a token count different from the grid is a dimension error."""
        with pytest.raises(DimensionError):
            apply_rotary(Tensor(np.ones((1, 1, 10, 8))), table)
