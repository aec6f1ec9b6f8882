"""A module containing the ablation runner: controlled training of model variants and the comparison tables."""

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import humanize
import numpy as np

from glyphweaver.analyzers.cluster_analyzer import cluster_metrics, collect_features
from glyphweaver.corpus.generator import GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import ConfigError, OracleInvalidError
from glyphweaver.harness.evaluator import EvalConfig, evaluate
from glyphweaver.harness.trainer import TrainConfig, Trainer
from glyphweaver.losses.schedule import LossConfig
from glyphweaver.models.config import ModelConfig

logger = logging.getLogger(__name__)

CHECK, DASH = "✓", "-"


@dataclass(frozen=True)
class AblationCell:
    """One table row: a label, the marks shown in the suite's columns and the config overrides it trains with."""
    name: str
    marks: tuple[str, ...]
    model: dict[str, Any] = field(default_factory=dict, hash=False)
    loss: dict[str, Any] = field(default_factory=dict, hash=False)

    def model_config(self, base: ModelConfig) -> ModelConfig:
        overrides = dict(self.model)
        option = overrides.pop("decay_option", None)
        config = replace(base, **overrides)
        if option is not None:
            config = replace(config, decay=replace(config.decay, option=option))
        return config

    def loss_config(self, base: LossConfig) -> LossConfig:
        return replace(base, **self.loss)


@dataclass(frozen=True)
class AblationSuite:
    name: str
    title: str
    columns: tuple[str, ...]
    cells: tuple[AblationCell, ...]


def _mark(flag: bool) -> str:
    return CHECK if flag else DASH


def _cace(decay: bool, fusion: bool) -> dict[str, Any]:
    return {"use_decay": decay, "use_fusion": fusion}


SUITES: dict[str, AblationSuite] = {
    "components": AblationSuite(
        "components", "Encoder constraint and memory-unit loss", ("CACE", "I2CL"),
        tuple(
            AblationCell(name, (_mark(cace), _mark(memory)), _cace(cace, cace),
                         {"contrastive": "iicl" if memory else "none"})
            for name, cace, memory in (
                ("baseline", False, False), ("+CACE", True, False), ("+I2CL", False, True), ("full", True, True),
            )
        ),
    ),
    "contrastive": AblationSuite(
        "contrastive", "Contrastive objective", ("Method",),
        tuple(
            AblationCell(kind, (label,), _cace(True, True), {"contrastive": kind})
            for kind, label in (("none", DASH), ("cc", "CC loss"), ("iicl", "I2CL"))
        ),
    ),
    "cace_parts": AblationSuite(
        "cace_parts", "Decay matrix and multi-scale fusion", ("D", "M-S"),
        tuple(
            AblationCell(name, (_mark(decay), _mark(fusion)), _cace(decay, fusion), {"contrastive": "iicl"})
            for name, decay, fusion in (
                ("plain", False, False), ("+D", True, False), ("+fusion", False, True), ("full", True, True),
            )
        ),
    ),
    "decay_options": AblationSuite(
        "decay_options", "Decay matrix options", ("Option",),
        tuple(
            AblationCell(f"option-{option}", (str(option),), {**_cace(True, True), "decay_option": option},
                         {"contrastive": "iicl"})
            for option in (1, 2, 3)
        ),
    ),
}


@dataclass
class CellResult:
    cell: AblationCell
    accuracies: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    digests: dict[int, list[str]] = field(default_factory=dict, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def mean_ratio(self) -> float:
        finite = [r for r in self.ratios if np.isfinite(r)]
        return float(np.mean(finite)) if finite else float("nan")


@dataclass
class AblationTable:
    suite: AblationSuite
    seeds: list[int]
    results: list[CellResult]

    def row(self, name: str) -> CellResult:
        for result in self.results:
            if result.cell.name == name:
                return result
        raise KeyError(name)

    def to_markdown(self) -> str:
        header = [*self.suite.columns, "Word acc. (mean)", "Std", "Intra/inter"]
        lines = [
            f"### {self.suite.title}",
            "",
            f"Seeds: {', '.join(str(s) for s in self.seeds)}",
            "",
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for result in self.results:
            values = [*result.cell.marks, f"{100 * result.mean:.1f}", f"{100 * result.std:.1f}",
                      f"{result.mean_ratio:.3f}"]
            lines.append("| " + " | ".join(values) + " |")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["cell", *self.suite.columns, "seed", "word_accuracy", "intra_inter_ratio"])
            for result in self.results:
                for seed, accuracy, ratio in zip(self.seeds, result.accuracies, result.ratios):
                    writer.writerow([result.cell.name, *result.cell.marks, seed, f"{accuracy:.6f}", f"{ratio:.6f}"])

    def write(self, out_dir: Union[str, Path]) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        markdown = out_dir / f"ablation-{self.suite.name}.md"
        table_csv = out_dir / f"ablation-{self.suite.name}.csv"
        markdown.write_text(self.to_markdown(), encoding="utf-8")
        self.write_csv(table_csv)
        return markdown, table_csv


def check_shared_order(results: Sequence[CellResult], seed: int) -> None:
    """All cells trained with one seed must have consumed identical batches."""
    reference = results[0].digests[seed]
    for result in results[1:]:
        if result.digests[seed] != reference:
            raise OracleInvalidError(
                f"cell {result.cell.name!r} saw a different data order than {results[0].cell.name!r} for seed {seed}"
            )


def run_ablation(suite_name: str, model_config: ModelConfig, train_config: TrainConfig, loss_config: LossConfig,
                 vocab: Vocabulary, train_set: GlyphDataset, eval_set: GlyphDataset,
                 seeds: Optional[Sequence[int]] = None, out_dir: Optional[Union[str, Path]] = None,
                 eval_config: EvalConfig = EvalConfig()) -> AblationTable:
    """
    Train and evaluate every cell of a suite on shared data, once per seed.

    Args:
        suite_name: One of SUITES
        model_config: Model settings the cells override
        train_config: Training settings; its seed is replaced per run
        loss_config: Loss settings the cells override
        vocab: Vocabulary of both splits
        train_set: Training split shared by all cells
        eval_set: Evaluation split shared by all cells
        seeds: Seeds to run, defaults to the train config's seed
        out_dir: Where per-cell checkpoints and the tables go; nothing is written when None
        eval_config: Evaluation settings

    Returns:
        AblationTable with per-seed accuracies and intra/inter ratios of every cell
    """
    if suite_name not in SUITES:
        raise ConfigError(f"unknown ablation suite {suite_name!r}; choose from {sorted(SUITES)}")
    suite = SUITES[suite_name]
    seeds = list(seeds) if seeds is not None else [train_config.seed]
    out_dir = Path(out_dir) if out_dir is not None else None
    results = [CellResult(cell) for cell in suite.cells]
    for seed in seeds:
        for result in results:
            cell = result.cell
            cell_dir = out_dir / suite.name / f"{cell.name}-seed{seed}" if out_dir is not None else None
            trainer = Trainer(cell.model_config(model_config), replace(train_config, seed=seed),
                              cell.loss_config(loss_config), vocab, cell_dir)
            trained = trainer.fit(train_set)
            report = evaluate(trained.model, eval_set, vocab, eval_config)
            features, labels = collect_features(trained.model, eval_set, vocab, eval_config.batch_size)
            result.accuracies.append(report.word_accuracy)
            result.ratios.append(cluster_metrics(features, labels).ratio)
            result.digests[seed] = trained.batch_digests
            logger.info("%s/%s seed %d: word accuracy %.4f", suite.name, cell.name, seed, report.word_accuracy)
        check_shared_order(results, seed)
        logger.info("seed %d: %s cells shared %s batches", seed, len(results),
                    humanize.intcomma(len(results[0].digests[seed])))

    table = AblationTable(suite, seeds, results)
    if out_dir is not None:
        table.write(out_dir)
    return table
