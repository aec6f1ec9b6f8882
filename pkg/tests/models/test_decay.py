"""Tests for the token grid and the spatial decay matrices."""

import numpy as np
import pytest

from glyphweaver.errors import ConfigError
from glyphweaver.models.config import DecayConfig
from glyphweaver.models.decay import DecaySpec, TokenGrid, build_decay, gamma_schedule


def brute_force(option: int, gamma: float, grid: TokenGrid, window: tuple[int, int] = (5, 3)) -> np.ndarray:
    out = np.zeros((grid.length, grid.length))
    for i in range(grid.length):
        xi, yi = i % grid.width, i // grid.width
        for j in range(grid.length):
            dx, dy = abs(xi - j % grid.width), abs(yi - j // grid.width)
            if option == 1:
                out[i, j] = gamma ** (dx + dy)
            elif option == 2:
                out[i, j] = gamma ** max(dx, dy)
            else:
                out[i, j] = float(dx <= window[0] and dy <= window[1])
    return out


class TestTokenGrid:
    """Test cases for TokenGrid."""

    def test_row_major_coordinates(self) -> None:
        """Test that index i maps to (i % W, i // W)."""
        grid = TokenGrid(2, 3)
        xs, ys = grid.coords
        assert xs.tolist() == [0, 1, 2, 0, 1, 2]
        assert ys.tolist() == [0, 0, 0, 1, 1, 1]
        assert grid.index_of(2, 1) == 5

    def test_chebyshev(self) -> None:
        """Test the Chebyshev distance matrix on a 2x3 grid."""
        cheb = TokenGrid(2, 3).chebyshev()
        assert cheb[0, 5] == 2
        assert cheb[0, 4] == 1
        assert (np.diag(cheb) == 0).all()


class TestBuildDecay:
    """Test cases for build_decay."""

    def test_option_two_value(self) -> None:
        """Test that option 2 uses the larger offset as exponent."""
        grid = TokenGrid(2, 3)
        decay = build_decay(DecaySpec(2, (0.5,)), grid)
        assert decay[0, grid.index_of(0, 0), grid.index_of(2, 1)] == 0.25

    def test_option_one_value(self) -> None:
        """Test that option 1 uses the Manhattan distance as exponent."""
        grid = TokenGrid(2, 3)
        decay = build_decay(DecaySpec(1, (0.5,)), grid)
        assert decay[0, grid.index_of(0, 0), grid.index_of(2, 1)] == 0.125

    def test_option_three_window(self) -> None:
        """Test the hard window edges of option 3."""
        grid = TokenGrid(4, 8)
        decay = build_decay(DecaySpec(3, (0.5,), (5, 3)), grid)
        origin = grid.index_of(0, 0)
        assert decay[0, origin, grid.index_of(6, 0)] == 0.0
        assert decay[0, origin, grid.index_of(5, 3)] == 1.0

    @pytest.mark.parametrize("gamma", [0.5, 0.9, 0.96875])
    def test_matches_brute_force(self, gamma: float) -> None:
        """Test every option against a double loop on an 8x16 grid, bit for bit."""
        grid = TokenGrid(8, 16)
        for option in (1, 2, 3):
            decay = build_decay(DecaySpec(option, (gamma,)), grid)[0]
            np.testing.assert_array_equal(decay, brute_force(option, gamma, grid))

    @pytest.mark.parametrize("option", [1, 2, 3])
    def test_symmetric_with_unit_diagonal(self, option: int) -> None:
        """Test symmetry and the unit diagonal."""
        decay = build_decay(DecaySpec(option, (0.9, 0.75)), TokenGrid(4, 6))
        for head in decay:
            np.testing.assert_array_equal(head, head.T)
            assert (np.diag(head) == 1.0).all()

    def test_option_two_dominates_option_one(self) -> None:
        """Test that max-distance decay is never below sum-distance decay."""
        grid = TokenGrid(8, 16)
        one = build_decay(DecaySpec(1, (0.9,)), grid)
        two = build_decay(DecaySpec(2, (0.9,)), grid)
        assert (two >= one).all()

    def test_option_three_is_binary(self) -> None:
        """Test that option 3 contains only zeros and ones."""
        decay = build_decay(DecaySpec(3, (0.9,)), TokenGrid(8, 16))
        assert set(np.unique(decay).tolist()) == {0.0, 1.0}

    def test_monotone_along_x(self) -> None:
        """Test that decay does not increase with |dx| for a fixed row offset."""
        grid = TokenGrid(3, 10)
        for option in (1, 2):
            row = build_decay(DecaySpec(option, (0.8,)), grid)[0, grid.index_of(0, 1)]
            along = [row[grid.index_of(x, 2)] for x in range(10)]
            assert all(a >= b for a, b in zip(along, along[1:]))

    def test_cached_and_read_only(self) -> None:
        """Test that equal specs share one read-only matrix."""
        spec, grid = DecaySpec(2, (0.9,)), TokenGrid(2, 4)
        decay = build_decay(spec, grid)
        assert build_decay(DecaySpec(2, (0.9,)), TokenGrid(2, 4)) is decay
        with pytest.raises(ValueError):
            decay[0, 0, 0] = 0.5

    def test_one_matrix_per_head(self) -> None:
        """Test that each head uses its own gamma."""
        decay = build_decay(DecaySpec(2, (0.5, 0.25)), TokenGrid(1, 3))
        assert decay.shape == (2, 3, 3)
        assert decay[0, 0, 2] == 0.25
        assert decay[1, 0, 2] == 0.0625


class TestDecaySpec:
    """Test cases for DecaySpec validation and the gamma schedule."""

    def test_invalid_option(self) -> None:
        """Test that an unknown option is rejected."""
        with pytest.raises(ConfigError):
            DecaySpec(4)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
    def test_gamma_outside_unit_interval(self, gamma: float) -> None:
        """Test that gamma must lie strictly inside (0, 1)."""
        with pytest.raises(ConfigError):
            DecaySpec(2, (gamma,))

    def test_negative_window(self) -> None:
        """Test that a negative window is rejected."""
        with pytest.raises(ConfigError):
            DecaySpec(3, (0.5,), (-1, 3))

    def test_schedule_values(self) -> None:
        """Test the per-head schedule 1 - 2^(-5-h)."""
        assert gamma_schedule(1) == [0.96875]
        assert gamma_schedule(4) == [0.96875, 0.984375, 0.9921875, 0.99609375]

    def test_schedule_needs_a_head(self) -> None:
        """Test that zero heads is rejected."""
        with pytest.raises(ConfigError):
            gamma_schedule(0)

    def test_config_resolution(self) -> None:
        """Test that DecayConfig fills, repeats or truncates gammas per stage head count."""
        assert DecayConfig().spec_for(2).gammas == (0.96875, 0.984375)
        assert DecayConfig(gammas=(0.5,)).spec_for(3).gammas == (0.5, 0.5, 0.5)
        assert DecayConfig(gammas=(0.5, 0.6, 0.7)).spec_for(2).gammas == (0.5, 0.6)
        with pytest.raises(ConfigError):
            DecayConfig(gammas=(0.5, 0.6)).spec_for(4)
