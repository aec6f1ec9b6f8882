"""A module containing the loss configuration, the late-activation schedule and the combined objective."""

from dataclasses import dataclass
from typing import Optional

from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import ConfigError

CONTRASTIVE_KINDS = ("iicl", "cc", "none")
MEMORY_INITS = ("normal", "classifier")


@dataclass(frozen=True)
class LossConfig:
    lambda_: float = 0.2
    delta: float = 1.0
    activation_fraction: float = 0.75
    contrastive: str = "iicl"
    cc_temperature: float = 0.1
    memory_init: str = "normal"

    def __post_init__(self) -> None:
        if self.contrastive not in CONTRASTIVE_KINDS:
            raise ConfigError(f"loss.contrastive must be one of {CONTRASTIVE_KINDS}, got {self.contrastive!r}")
        if self.memory_init not in MEMORY_INITS:
            raise ConfigError(f"loss.memory_init must be one of {MEMORY_INITS}, got {self.memory_init!r}")
        if not 0.0 <= self.activation_fraction <= 1.0:
            raise ConfigError(f"loss.activation_fraction must lie in [0, 1], got {self.activation_fraction}")
        if self.lambda_ < 0 or self.delta < 0 or self.cc_temperature <= 0:
            raise ConfigError("loss.lambda and loss.delta must be non-negative, loss.cc_temperature positive")


@dataclass(frozen=True)
class LossSchedule:
    """The contrastive weight is 0 before activation_fraction * total_steps and lambda_ afterwards."""
    total_steps: int
    activation_fraction: float = 0.75
    lambda_: float = 0.2

    @classmethod
    def from_config(cls, config: LossConfig, total_steps: int) -> "LossSchedule":
        return cls(total_steps, config.activation_fraction, config.lambda_)

    @property
    def activation_step(self) -> float:
        return self.activation_fraction * self.total_steps

    def weight_at(self, step: int) -> float:
        return 0.0 if step < self.activation_step else self.lambda_


def combined_loss(l_ce: Tensor, l_cl: Optional[Tensor], schedule: LossSchedule, step: int) -> Tensor:
    """L_ce + weight(step) * L_cl; returns l_ce itself whenever the contrastive term is inactive."""
    weight = schedule.weight_at(step)
    if l_cl is None or weight == 0.0:
        return l_ce
    return l_ce + l_cl * weight
