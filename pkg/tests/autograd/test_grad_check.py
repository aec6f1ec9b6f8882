"""Tests for the finite-difference gradient oracle."""

import numpy as np
import pytest

from glyphweaver.autograd.grad_check import grad_check, relative_error
from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import OracleInvalidError


class TestGradCheck:
    """Test cases for grad_check."""

    def test_square_sum_passes(self) -> None:
        """Test that a correct gradient passes and leaves the tape gradient [2, 4]."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        report = grad_check(lambda: (x * x).sum(), [x])
        assert report.passed
        assert report.checked_elements == 2
        np.testing.assert_allclose(x.grad, [2.0, 4.0])

    def test_parameters_restored(self) -> None:
        """Test that perturbed parameters are restored exactly."""
        x = Tensor([0.3, -1.7], requires_grad=True)
        before = x.data.copy()
        grad_check(lambda: (x * x * x).sum(), [x])
        np.testing.assert_array_equal(x.data, before)

    def test_nondeterministic_target(self) -> None:
        """Test that a target returning different values is rejected."""
        x = Tensor([1.0], requires_grad=True)
        noise = np.random.default_rng(0)
        with pytest.raises(OracleInvalidError):
            grad_check(lambda: (x * float(noise.normal())).sum(), [x])

    def test_wrong_gradient_fails(self) -> None:
        """Test that an op with a wrong backward is caught."""
        x = Tensor([1.5, -0.5], requires_grad=True)

        def broken() -> Tensor:
            return Tensor.from_op(x.data ** 2, (x,), lambda g: (g * x.data,), "broken").sum()

        assert not grad_check(broken, [x]).passed

    def test_relative_error_floor(self) -> None:
        """Test that tiny gradients are compared against the floor."""
        assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)
