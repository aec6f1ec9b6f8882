"""A module containing the central finite-difference oracle used to verify tape gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from glyphweaver.autograd.tensor import Tensor, no_grad
from glyphweaver.errors import OracleInvalidError

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4


@dataclass
class GradCheckReport:
    """Outcome of one gradient check: worst relative error overall and per parameter."""
    max_relative_error: float
    tolerance: float
    per_parameter: list[float] = field(default_factory=list)
    checked_elements: int = 0

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
    floor: float = 1e-6,
) -> GradCheckReport:
    """
    Compare tape gradients of a scalar computation against central differences.

    Args:
        f: Zero-argument callable rebuilding the scalar from the current parameter values
        params: Leaf tensors (requires_grad=True) to check, perturbed in place
        eps: Finite-difference step
        tolerance: Maximum relative error for the check to pass
        floor: Lower bound of the relative-error denominator for near-zero gradients

    Returns:
        GradCheckReport with the maximum relative error over every parameter element
    """
    for param in params:
        param.zero_grad()
    loss = f()
    baseline = loss.item()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    per_parameter: list[float] = []
    checked = 0
    with no_grad():
        if f().item() != baseline:
            raise OracleInvalidError("grad_check target returned different values for identical parameters")
        for param, grad in zip(params, analytic):
            flat = param.data.reshape(-1)
            worst = 0.0
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                plus = f().item()
                flat[i] = original - eps
                minus = f().item()
                flat[i] = original
                numeric = (plus - minus) / (2.0 * eps)
                worst = max(worst, relative_error(float(grad.reshape(-1)[i]), numeric, floor))
            per_parameter.append(worst)
            checked += flat.size

    report = GradCheckReport(max(per_parameter, default=0.0), tolerance, per_parameter, checked)
    logger.debug("grad_check: %d elements, max relative error %.3e", checked, report.max_relative_error)
    return report
