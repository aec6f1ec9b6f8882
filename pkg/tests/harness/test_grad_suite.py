"""Tests for the gradient-check suite."""

import pytest

from glyphweaver.errors import ConfigError
from glyphweaver.harness.grad_suite import CASES, run_grad_suite


class TestGradSuite:
    """Test cases for run_grad_suite."""

    def test_every_case_passes_on_two_seeds(self) -> None:
        """Test each parameterized op against finite differences."""
        report = run_grad_suite(seeds=2)
        assert report.passed, report.summary()
        assert len(report.results) == 2 * len(CASES)
        assert set(report.worst()) == set(CASES)

    def test_selected_cases(self) -> None:
        """Test running a subset of cases."""
        report = run_grad_suite(seeds=1, cases=["layer_norm", "iicl"])
        assert [name for name, _, _ in report.results] == ["layer_norm", "iicl"]

    def test_unknown_case(self) -> None:
        """Test that unknown case names raise ConfigError."""
        with pytest.raises(ConfigError):
            run_grad_suite(seeds=1, cases=["softmax_2"])

    @pytest.mark.slow
    def test_full_suite(self) -> None:
        """Test the full twenty-seed suite."""
        assert run_grad_suite().passed
