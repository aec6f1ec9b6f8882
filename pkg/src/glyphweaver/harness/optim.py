"""A module containing the Adam optimizer, the warmup-cosine learning-rate schedule and gradient clipping."""

import math
from typing import Iterable, Sequence

import numpy as np

from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import CheckpointError


class Adam:
    """
    Adam over named parameters. Parameters whose grad is None in a step are left untouched
    (their moments are not advanced either).
    """
    def __init__(self, named_params: Iterable[tuple[str, Tensor]], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.params = dict(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, param in self.params.items():
            if param.grad is None:
                continue
            grad = param.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def state_dict(self) -> dict[str, dict[str, np.ndarray]]:
        return {"m": self.m, "v": self.v}

    def load_state_dict(self, m: dict[str, np.ndarray], v: dict[str, np.ndarray], step_count: int) -> None:
        if set(m) != set(self.params) or set(v) != set(self.params):
            raise CheckpointError("optimizer state does not cover the model parameters")
        for name, param in self.params.items():
            if m[name].shape != param.shape or v[name].shape != param.shape:
                raise CheckpointError(f"optimizer state for {name} has the wrong shape")
            self.m[name][...] = m[name]
            self.v[name][...] = v[name]
        self.step_count = step_count


def learning_rate(step: int, total_steps: int, warmup_steps: int, peak: float) -> float:
    """Linear warmup from 0 to `peak` over warmup_steps, then cosine decay to 0 at total_steps."""
    if warmup_steps > 0 and step < warmup_steps:
        return peak * step / warmup_steps
    decay_steps = max(total_steps - warmup_steps, 1)
    progress = min(max(step - warmup_steps, 0) / decay_steps, 1.0)
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most max_norm; returns the norm before clipping."""
    grads = [p.grad for p in params if p.grad is not None]
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm > 0:
        factor = max_norm / (total + 1e-12)
        for param in params:
            if param.grad is not None:
                param.grad = param.grad * factor
    return total
