"""A module containing the training configuration and the Trainer that fits a recognizer on a glyph split."""

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import humanize
import numpy as np

from glyphweaver.autograd.tensor import Tensor
from glyphweaver.corpus.generator import CorpusSpec, GlyphDataset
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import ConfigError, DivergenceError
from glyphweaver.harness.checkpoint import Checkpoint
from glyphweaver.harness.loader import Batch, BatchLoader
from glyphweaver.harness.optim import Adam, clip_grad_norm, learning_rate
from glyphweaver.losses.contrastive import cc_loss_baseline
from glyphweaver.losses.cross_entropy import cross_entropy
from glyphweaver.losses.iicl import iicl, valid_positions
from glyphweaver.losses.schedule import LossConfig, LossSchedule, combined_loss
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.recognizer import GlyphRecognizer

logger = logging.getLogger(__name__)

# Data order draws from its own stream so model init and shuffling stay independent.
DATA_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings; the peak lr is base_lr * batch_size / lr_reference_batch."""
    epochs: int = 20
    warmup_fraction: float = 0.075
    base_lr: float = 5e-4
    batch_size: int = 384
    lr_reference_batch: int = 384
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: Optional[float] = None
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.lr_reference_batch < 1:
            raise ConfigError("train.epochs, train.batch_size and train.lr_reference_batch must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError(f"train.warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if self.base_lr <= 0:
            raise ConfigError(f"train.base_lr must be positive, got {self.base_lr}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError(f"train.clip_norm must be positive when set, got {self.clip_norm}")

    @property
    def peak_lr(self) -> float:
        return self.base_lr * self.batch_size / self.lr_reference_batch


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    weight: float
    l_ce: float
    l_cl: float
    loss: float
    batch_digest: str


@dataclass
class TrainResult:
    model: GlyphRecognizer
    checkpoint: Checkpoint
    checkpoint_path: Optional[Path]
    history: list[StepRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.history[-1].loss if self.history else float("nan")

    @property
    def batch_digests(self) -> list[str]:
        return [record.batch_digest for record in self.history]


class Trainer:
    """
    Teacher-forced training with the combined objective L_ce + weight(step) * L_cl.

    The contrastive term is only built once its schedule weight is non-zero, so it cannot
    touch gradients before activation. Checkpoints are written at epoch boundaries and carry
    the data-order rng, which makes a resumed run identical to an uninterrupted one.
    A corpus spec, when given, is recorded in every checkpoint so evaluation can rebuild the
    training distribution.
    """
    def __init__(self, model_config: ModelConfig, train_config: TrainConfig, loss_config: LossConfig,
                 vocab: Vocabulary, out_dir: Optional[Union[str, Path]] = None,
                 callback: Optional[Callable[[StepRecord], None]] = None,
                 corpus: Optional[CorpusSpec] = None) -> None:
        if model_config.vocab_size != vocab.size:
            raise ConfigError(f"model vocab_size {model_config.vocab_size} != vocabulary size {vocab.size}")
        self.model_config = model_config
        self.train_config = train_config
        self.loss_config = loss_config
        self.vocab = vocab
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.callback = callback
        self.corpus = corpus

    def build_model(self) -> GlyphRecognizer:
        model = GlyphRecognizer(self.model_config, self.train_config.seed)
        if self.loss_config.contrastive == "iicl":
            model.attach_memory(self.loss_config.memory_init)
        return model

    def contrastive_term(self, model: GlyphRecognizer, features: Tensor, targets: np.ndarray) -> Optional[Tensor]:
        kind = self.loss_config.contrastive
        if kind == "iicl":
            return iicl(features, targets, model.memory, delta=self.loss_config.delta)
        if kind == "cc" and valid_positions(targets).sum() >= 2:
            return cc_loss_baseline(features, targets, temperature=self.loss_config.cc_temperature)
        return None

    def fit(self, dataset: GlyphDataset, resume: Optional[Union[str, Path]] = None) -> TrainResult:
        """
        Train on a split.

        Args:
            dataset: Training split
            resume: Checkpoint written by an earlier run with the same settings

        Returns:
            TrainResult with the trained model, its final checkpoint and the per-step history
        """
        config = self.train_config
        model = self.build_model()
        optimizer = Adam(model.named_parameters(), config.beta1, config.beta2, config.eps)
        data_rng = np.random.default_rng((config.seed, DATA_STREAM))
        loader = BatchLoader(dataset, self.vocab, self.model_config.max_label_len, config.batch_size, data_rng)
        steps_per_epoch = loader.batches_per_epoch
        total_steps = config.epochs * steps_per_epoch
        warmup_steps = round(config.warmup_fraction * total_steps)
        schedule = LossSchedule.from_config(self.loss_config, total_steps)

        step = 0
        last_path: Optional[Path] = None
        if resume is not None:
            checkpoint = Checkpoint.load(resume)
            checkpoint.restore(model, optimizer, data_rng)
            step = checkpoint.step
            last_path = Path(resume)
            logger.info("resumed from %s at step %d", resume, step)
        checkpoint = Checkpoint.capture(model, self.vocab, step, optimizer, data_rng, self._extra())

        history: list[StepRecord] = []
        started = time.monotonic()
        logger.info(
            "training %s parameters for %s steps (%d per epoch), peak lr %.2e",
            humanize.intcomma(model.parameter_count()), humanize.intcomma(total_steps), steps_per_epoch, config.peak_lr,
        )
        for epoch in range(step // steps_per_epoch, config.epochs):
            for batch in loader.iterate_epoch():
                lr = learning_rate(step, total_steps, warmup_steps, config.peak_lr)
                record = self._step(model, optimizer, batch, schedule, step, epoch, lr, last_path)
                step += 1
                history.append(record)
                if config.log_every and step % config.log_every == 0:
                    logger.info(
                        "step %d lr %.3e weight %.2f ce %.4f cl %.4f loss %.4f",
                        step, lr, record.weight, record.l_ce, record.l_cl, record.loss,
                    )
                if self.callback is not None:
                    self.callback(record)
            checkpoint = Checkpoint.capture(model, self.vocab, step, optimizer, data_rng, self._extra())
            if self.out_dir is not None:
                last_path = checkpoint.save(self.out_dir / f"epoch-{epoch + 1:03d}.ckpt")

        if self.out_dir is not None and history:
            self.write_history(self.out_dir / "history.csv", history)
        logger.info("training finished in %s", humanize.precisedelta(time.monotonic() - started))
        return TrainResult(model, checkpoint, last_path, history)

    def _step(self, model: GlyphRecognizer, optimizer: Adam, batch: Batch, schedule: LossSchedule,
              step: int, epoch: int, lr: float, last_path: Optional[Path]) -> StepRecord:
        optimizer.zero_grad()
        output = model.forward(batch.images, batch.targets)
        l_ce = cross_entropy(output.logits, batch.targets)
        weight = schedule.weight_at(step)
        l_cl = self.contrastive_term(model, output.features, batch.targets) if weight > 0 else None
        loss = combined_loss(l_ce, l_cl, schedule, step)
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(f"loss became {value} at step {step}", last_path)
        loss.backward()
        if self.train_config.clip_norm is not None:
            clip_grad_norm(list(optimizer.params.values()), self.train_config.clip_norm)
        optimizer.step(lr)
        return StepRecord(step, epoch, lr, weight, l_ce.item(), l_cl.item() if l_cl is not None else 0.0,
                          value, batch.digest)

    def _extra(self) -> dict:
        extra = {"loss": asdict(self.loss_config), "train": asdict(self.train_config)}
        if self.corpus is not None:
            extra["corpus"] = self.corpus.to_dict()
        return extra

    @staticmethod
    def write_history(path: Path, history: list[StepRecord]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "epoch", "lr", "weight", "l_ce", "l_cl", "loss", "batch_digest"])
            for r in history:
                writer.writerow([r.step, r.epoch, f"{r.lr:.8e}", r.weight, f"{r.l_ce:.8f}", f"{r.l_cl:.8f}",
                                 f"{r.loss:.8f}", r.batch_digest])
