"""Tests for the masked token cross-entropy."""

import numpy as np
import pytest

from glyphweaver.autograd.grad_check import grad_check
from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import DimensionError, InputError
from glyphweaver.losses.cross_entropy import cross_entropy


class TestCrossEntropy:
    """Test cases for cross_entropy."""

    def test_uniform_logits(self) -> None:
        """Test that uniform logits over 4 classes cost ln 4."""
        loss = cross_entropy(Tensor(np.zeros((1, 2, 4))), np.array([[1, 2]]))
        assert loss.item() == pytest.approx(1.386294, abs=1e-6)

    def test_padding_ignored(self) -> None:
        """Test that pad positions do not change the mean."""
        logits = np.random.default_rng(0).normal(size=(1, 2, 5))
        full = cross_entropy(Tensor(logits), np.array([[3, 0]])).item()
        single = cross_entropy(Tensor(logits[:, :1]), np.array([[3]])).item()
        assert full == pytest.approx(single, rel=1e-12)

    def test_confident_prediction(self) -> None:
        """Test that a dominant correct logit costs almost nothing."""
        logits = np.zeros((1, 1, 3))
        logits[0, 0, 2] = 50.0
        assert cross_entropy(Tensor(logits), np.array([[2]])).item() == pytest.approx(0.0, abs=1e-12)

    def test_all_padding(self) -> None:
        """Test that a batch of only padding is rejected."""
        with pytest.raises(InputError):
            cross_entropy(Tensor(np.zeros((2, 3, 4))), np.zeros((2, 3), dtype=int))

    def test_shape_mismatch(self) -> None:
        """Test that logits and targets must agree on (B, T)."""
        with pytest.raises(DimensionError):
            cross_entropy(Tensor(np.zeros((2, 3, 4))), np.ones((2, 2), dtype=int))

    def test_gradient(self) -> None:
        """Test the gradient against finite differences."""
        logits = Tensor(np.random.default_rng(1).normal(size=(2, 3, 5)), requires_grad=True)
        targets = np.array([[3, 4, 0], [2, 1, 3]])
        assert grad_check(lambda: cross_entropy(logits, targets), [logits]).passed

    def test_gradient_rows_sum_to_zero(self) -> None:
        """Test that the logit gradient sums to zero at every position, padded ones included."""
        logits = Tensor(np.random.default_rng(2).normal(size=(2, 4, 6)), requires_grad=True)
        targets = np.array([[3, 4, 2, 0], [5, 1, 0, 0]])
        loss = cross_entropy(logits, targets)
        assert loss.shape == ()
        loss.backward()
        np.testing.assert_allclose(logits.grad.sum(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_array_equal(logits.grad[1, 2:], 0.0)
