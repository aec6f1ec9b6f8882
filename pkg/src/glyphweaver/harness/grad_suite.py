"""A module containing the gradient-check suite run over every parameterized op on small random shapes."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import humanize
import numpy as np

from glyphweaver.autograd.grad_check import DEFAULT_EPS, DEFAULT_TOLERANCE, GradCheckReport, grad_check
from glyphweaver.autograd.tensor import Tensor
from glyphweaver.errors import ConfigError
from glyphweaver.losses.contrastive import cc_loss_baseline
from glyphweaver.losses.cross_entropy import cross_entropy
from glyphweaver.losses.iicl import MemoryBank, iicl
from glyphweaver.models.decay import DecaySpec, TokenGrid, build_decay
from glyphweaver.models.decoder import DecoderLayer
from glyphweaver.models.encoder import CaceBlock, rotary_table
from glyphweaver.models.layers import LayerNorm, Linear
from glyphweaver.models.rotary import apply_rotary, pair_logits

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 20

# A case builds (scalar function, tensors to check) from a seeded generator.
CaseBuilder = Callable[[np.random.Generator], tuple[Callable[[], Tensor], list[Tensor]]]


def _leaf(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _projected(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    # A fixed random projection turns a tensor output into a scalar with no symmetric cancellations.
    weights = rng.normal(size=out.shape)
    return lambda value: (value * weights).sum()


def layer_norm_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    width = int(rng.integers(3, 7))
    norm = LayerNorm(width)
    norm.gain.data[...] = rng.normal(1.0, 0.2, size=width)
    norm.bias.data[...] = rng.normal(0.0, 0.2, size=width)
    x = _leaf(rng, 2, int(rng.integers(1, 4)), width)
    project = _projected(norm(x), rng)
    return lambda: project(norm(x)), [x, *norm.parameters()]


def _block_case(rng: np.random.Generator, decayed: bool) -> tuple[Callable[[], Tensor], list[Tensor]]:
    grid = TokenGrid(int(rng.integers(1, 3)), int(rng.integers(2, 4)))
    block = CaceBlock(8, 2, 2, rng)
    decay = build_decay(DecaySpec(int(rng.integers(1, 4)), (0.9, 0.75)), grid) if decayed else None
    x = _leaf(rng, 1, grid.length, 8)
    project = _projected(block(x, grid, decay), rng)
    return lambda: project(block(x, grid, decay)), [x, *block.parameters()]


def cace_block_decayed_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    return _block_case(rng, decayed=True)


def cace_block_plain_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    return _block_case(rng, decayed=False)


def rotary_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    grid = TokenGrid(int(rng.integers(1, 3)), int(rng.integers(2, 5)))
    table = rotary_table(grid, 4, 100.0)
    q = _leaf(rng, 1, 2, grid.length, 4)
    k = _leaf(rng, 1, 2, grid.length, 4)

    def logits() -> Tensor:
        return pair_logits(apply_rotary(q, table), apply_rotary(k, table, conjugate=True))

    project = _projected(logits(), rng)
    return lambda: project(logits()), [q, k]


def decoder_ce_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    vocab, length = 5, 3
    layer = DecoderLayer(8, 2, 2, rng)
    classifier = Linear(8, vocab, rng)
    x = _leaf(rng, 2, length, 8)
    memory = _leaf(rng, 2, int(rng.integers(2, 5)), 8)
    targets = rng.integers(1, vocab, size=(2, length))
    targets[1, -1] = 0
    return (lambda: cross_entropy(classifier(layer(x, memory)), targets),
            [x, memory, *layer.parameters(), *classifier.parameters()])


def iicl_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    vocab, width = 6, 4
    bank = MemoryBank.random(vocab, width, rng)
    features = _leaf(rng, 2, 3, width)
    labels = rng.integers(2, vocab, size=(2, 3))
    labels[0, -1] = 0
    delta = float(rng.uniform(0.5, 2.0))
    return lambda: iicl(features, labels, bank, delta=delta), [features, bank.units]


def cc_loss_case(rng: np.random.Generator) -> tuple[Callable[[], Tensor], list[Tensor]]:
    features = _leaf(rng, 2, 3, 4)
    labels = np.array([[3, 4, 3], [4, 5, 3]])
    temperature = float(rng.uniform(0.2, 1.0))
    return lambda: cc_loss_baseline(features, labels, temperature=temperature), [features]


CASES: dict[str, CaseBuilder] = {
    "layer_norm": layer_norm_case,
    "cace_block_decayed": cace_block_decayed_case,
    "cace_block_plain": cace_block_plain_case,
    "rotary": rotary_case,
    "decoder_layer_ce": decoder_ce_case,
    "iicl": iicl_case,
    "cc_loss": cc_loss_case,
}


@dataclass
class GradSuiteReport:
    tolerance: float
    results: list[tuple[str, int, GradCheckReport]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for _, _, report in self.results)

    def worst(self) -> dict[str, float]:
        worst: dict[str, float] = {}
        for name, _, report in self.results:
            worst[name] = max(worst.get(name, 0.0), report.max_relative_error)
        return worst

    def summary(self) -> str:
        lines = []
        for name, error in self.worst().items():
            status = "ok" if error <= self.tolerance else "FAIL"
            lines.append(f"{name:<20} max relative error {error:.3e}  {status}")
        return "\n".join(lines)


def run_grad_suite(seeds: int = DEFAULT_SEEDS, cases: Optional[Sequence[str]] = None, base_seed: int = 0,
                   eps: float = DEFAULT_EPS, tolerance: float = DEFAULT_TOLERANCE) -> GradSuiteReport:
    """
    Run grad_check for each case over `seeds` independently seeded random shapes.

    Args:
        seeds: Number of seeds per case
        cases: Case names to run, all of CASES by default
        base_seed: First seed; case i, seed s uses default_rng((base_seed + s, i))
        eps: Finite-difference step
        tolerance: Maximum relative error

    Returns:
        GradSuiteReport with one GradCheckReport per (case, seed)
    """
    names = list(CASES) if cases is None else list(cases)
    unknown = [name for name in names if name not in CASES]
    if unknown:
        raise ConfigError(f"unknown grad-check cases {unknown}; choose from {sorted(CASES)}")
    suite = GradSuiteReport(tolerance)
    started = time.monotonic()
    for case_index, name in enumerate(names):
        for seed in range(seeds):
            rng = np.random.default_rng((base_seed + seed, case_index))
            f, params = CASES[name](rng)
            report = grad_check(f, params, eps, tolerance)
            suite.results.append((name, seed, report))
            if not report.passed:
                logger.warning("%s seed %d: relative error %.3e", name, seed, report.max_relative_error)
    logger.info("gradient suite: %d checks in %s", len(suite.results),
                humanize.precisedelta(time.monotonic() - started))
    return suite
