"""A module containing the main application class for GlyphWeaver and its command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, Union

import humanize

from glyphweaver.analyzers.attention_analyzer import attention_locality, capture_attention, dump_attention
from glyphweaver.analyzers.cluster_analyzer import ClusterReport, cluster_metrics, collect_features, write_feature_dump
from glyphweaver.corpus.generator import (
    MANIFEST_NAME,
    CalibrationReport,
    CorpusManifest,
    CorpusSpec,
    GlyphDataset,
    calibrate_corpus,
    generate_corpus,
)
from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import GlyphWeaverError, InputError
from glyphweaver.harness.ablation import SUITES, AblationTable, run_ablation
from glyphweaver.harness.checkpoint import Checkpoint
from glyphweaver.harness.evaluator import MetricsReport, evaluate, weighted_average
from glyphweaver.harness.grad_suite import CASES, DEFAULT_SEEDS, GradSuiteReport, run_grad_suite
from glyphweaver.harness.trainer import Trainer, TrainResult
from glyphweaver.models.recognizer import GlyphRecognizer
from glyphweaver.settings import VARIANTS, Settings, load_settings, parse_value

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
# Attention statistics are taken over at most this many eval samples.
LOCALITY_SAMPLES = 100


class GlyphWeaver:
    """
    Application facade tying settings, corpus, training and diagnostics together.
    Every CLI subcommand maps onto one method; results are written below `out_dir`
    and returned to the caller, which decides what to print.
    """
    def __init__(self, settings: Settings, out_dir: Union[str, Path] = "runs") -> None:
        self.settings = settings
        self.out_dir = Path(out_dir)

    def dataset(self, split: str, corpus_dir: Optional[Union[str, Path]] = None) -> GlyphDataset:
        """Read a split from a generated corpus, or render it in memory from the corpus settings."""
        if corpus_dir is not None:
            return GlyphDataset.open(corpus_dir, split)
        return GlyphDataset.render(self.settings.corpus, split)

    def corpus_spec(self, corpus_dir: Optional[Union[str, Path]] = None) -> CorpusSpec:
        if corpus_dir is not None:
            return CorpusManifest.load(Path(corpus_dir) / MANIFEST_NAME).spec
        return self.settings.corpus

    def checkpoint_dataset(self, checkpoint: Checkpoint, split: str,
                           corpus_dir: Optional[Union[str, Path]] = None) -> GlyphDataset:
        """
        The split a checkpoint is diagnosed on.

        Without a corpus directory the split is rendered from the corpus recorded in the
        checkpoint, falling back to the corpus settings for checkpoints that carry none.
        A corpus whose image size or symbols the model cannot handle raises InputError.
        """
        recorded = checkpoint.extra.get("corpus")
        if corpus_dir is not None:
            spec = self.corpus_spec(corpus_dir)
            if recorded is not None and spec != CorpusSpec.from_dict(recorded):
                logger.warning("%s differs from the corpus the checkpoint was trained on", corpus_dir)
        elif recorded is not None:
            spec = CorpusSpec.from_dict(recorded)
        else:
            spec = self.settings.corpus
        if spec.image_size != checkpoint.model_config.image_size:
            raise InputError(f"corpus images are {spec.image_size} but the checkpoint model expects "
                             f"{checkpoint.model_config.image_size}")
        unknown = [symbol for symbol in spec.symbols if symbol not in checkpoint.vocabulary]
        if unknown:
            raise InputError(f"corpus symbols {unknown} are not in the checkpoint vocabulary")
        if corpus_dir is not None:
            return GlyphDataset.open(corpus_dir, split)
        return GlyphDataset.render(spec, split)

    def gen_corpus(self, out_dir: Optional[Union[str, Path]] = None) -> CorpusManifest:
        return generate_corpus(self.settings.corpus, out_dir or self.out_dir / "corpus", self.settings.eval.threads)

    def calibrate(self, samples_per_class: int = 50) -> CalibrationReport:
        return calibrate_corpus(self.settings.corpus, samples_per_class)

    def train(self, corpus_dir: Optional[Union[str, Path]] = None,
              resume: Optional[Union[str, Path]] = None) -> tuple[TrainResult, MetricsReport]:
        """
        Train on the train split, then evaluate on the eval split.

        Returns:
            The training result and an eval MetricsReport carrying the loss curve,
            attention locality and intra/inter ratio
        """
        settings = self.settings
        trainer = Trainer(settings.model, settings.train, settings.loss, settings.vocabulary, self.out_dir,
                          corpus=self.corpus_spec(corpus_dir))
        result = trainer.fit(self.dataset("train", corpus_dir), resume)
        eval_set = self.dataset("eval", corpus_dir)
        report = self.diagnose(result.model, eval_set)
        report.loss_curve = [record.loss for record in result.history]
        self.out_dir.mkdir(parents=True, exist_ok=True)
        report.write_csv(self.out_dir / "eval-predictions.csv")
        return result, report

    def diagnose(self, model: GlyphRecognizer, dataset: GlyphDataset) -> MetricsReport:
        """Evaluate a model and fill in its attention and feature diagnostics."""
        vocab = self.settings.vocabulary
        report = evaluate(model, dataset, vocab, self.settings.eval)
        sample = dataset.images[:LOCALITY_SAMPLES]
        report.attention_locality = attention_locality(capture_attention(model, sample))
        features, labels = collect_features(model, dataset, vocab, self.settings.eval.batch_size)
        report.cluster_ratio = cluster_metrics(features, labels).ratio
        return report

    def evaluate(self, checkpoint_path: Union[str, Path], splits: Sequence[str] = ("eval",),
                 corpus_dir: Optional[Union[str, Path]] = None) -> tuple[list[MetricsReport], float]:
        """Evaluate a checkpoint on one or more splits; returns the reports and their weighted average."""
        checkpoint = Checkpoint.load(checkpoint_path)
        model = checkpoint.build_model()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        reports = []
        for split in splits:
            report = evaluate(model, self.checkpoint_dataset(checkpoint, split, corpus_dir), checkpoint.vocabulary,
                              self.settings.eval)
            report.write_csv(self.out_dir / f"{split}-predictions.csv")
            reports.append(report)
        return reports, weighted_average(reports)

    def ablate(self, suite: str, corpus_dir: Optional[Union[str, Path]] = None,
               seeds: Optional[Sequence[int]] = None) -> AblationTable:
        settings = self.settings
        return run_ablation(
            suite, settings.model, settings.train, settings.loss, settings.vocabulary,
            self.dataset("train", corpus_dir), self.dataset("eval", corpus_dir),
            seeds, self.out_dir, settings.eval,
        )

    def dump_attention(self, checkpoint_path: Union[str, Path], sample: int = 0, query: int = 0,
                       corpus_dir: Optional[Union[str, Path]] = None) -> list[Path]:
        """Heatmaps of one eval sample's attention from a query token, per block and head."""
        checkpoint = Checkpoint.load(checkpoint_path)
        dataset = self.checkpoint_dataset(checkpoint, "eval", corpus_dir)
        if not 0 <= sample < len(dataset):
            raise InputError(f"sample {sample} is outside the eval split of {len(dataset)} samples")
        model = checkpoint.build_model()
        maps = capture_attention(model, dataset.images[sample:sample + 1])
        return dump_attention(maps, query, self.out_dir / f"attention-sample{sample}-query{query}")

    def cluster_metrics(self, checkpoint_path: Union[str, Path], split: str = "eval",
                        corpus_dir: Optional[Union[str, Path]] = None) -> tuple[ClusterReport, Vocabulary]:
        checkpoint = Checkpoint.load(checkpoint_path)
        model = checkpoint.build_model()
        vocab = checkpoint.vocabulary
        features, labels = collect_features(model, self.checkpoint_dataset(checkpoint, split, corpus_dir), vocab,
                                            self.settings.eval.batch_size)
        units = model.memory.units.numpy() if model.memory is not None else None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_feature_dump(self.out_dir / f"{split}-features.csv", features, labels, vocab)
        return cluster_metrics(features, labels, units), vocab

    def grad_check(self, seeds: int = DEFAULT_SEEDS, cases: Optional[Sequence[str]] = None) -> GradSuiteReport:
        return run_grad_suite(seeds, cases, base_seed=self.settings.train.seed)


def _override(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected section.key=value, got {text!r}")
    return key.strip(), parse_value(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyphweaver", description="Desk-scale scene-text recognition experiments")
    parser.add_argument("--config", type=Path, help="settings file with section.key = value lines")
    parser.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                        metavar="KEY=VALUE", help="override one settings key (repeatable)")
    parser.add_argument("--seed", type=int, help="training seed")
    parser.add_argument("--variant", choices=VARIANTS, help="model preset")
    parser.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-corpus", help="render the train and eval splits to disk")
    gen.add_argument("--calibrate", action="store_true", help="also print the template-matcher calibration")

    train = commands.add_parser("train", help="train a recognizer and evaluate it")
    train.add_argument("--corpus", type=Path, help="generated corpus directory (rendered in memory if omitted)")
    train.add_argument("--resume", type=Path, help="checkpoint to continue from")

    ev = commands.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("checkpoint", type=Path)
    ev.add_argument("--corpus", type=Path)
    ev.add_argument("--split", dest="splits", action="append", choices=("train", "eval"))

    ablate = commands.add_parser("ablate", help="run an ablation suite")
    ablate.add_argument("suite", choices=sorted(SUITES))
    ablate.add_argument("--corpus", type=Path)
    ablate.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds from --seed")

    dump = commands.add_parser("dump-attention", help="write per-head attention heatmaps as PGM files")
    dump.add_argument("checkpoint", type=Path)
    dump.add_argument("--corpus", type=Path)
    dump.add_argument("--sample", type=int, default=0, help="eval sample index")
    dump.add_argument("--query", type=int, default=0, help="query token index on the stage-1 grid")

    cluster = commands.add_parser("cluster-metrics", help="feature cluster statistics and feature dump")
    cluster.add_argument("checkpoint", type=Path)
    cluster.add_argument("--corpus", type=Path)
    cluster.add_argument("--split", default="eval", choices=("train", "eval"))

    grad = commands.add_parser("grad-check", help="finite-difference check of every parameterized op")
    grad.add_argument("--seeds", type=int, default=DEFAULT_SEEDS)
    grad.add_argument("--case", dest="cases", action="append", choices=sorted(CASES))
    return parser


def run(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, dict(args.overrides), args.variant, args.seed)
    app = GlyphWeaver(settings, args.out)
    if args.command == "gen-corpus":
        manifest = app.gen_corpus(args.out)
        counts = ", ".join(f"{humanize.intcomma(n)} {split}" for split, n in manifest.sample_counts.items())
        print(f"corpus written to {args.out}: {counts} samples")
        if args.calibrate:
            report = app.calibrate()
            print(f"template rank-1 rate {report.rank1_rate:.3f}, confusable pair rate {report.confusable_rate:.3f}, "
                  f"other pair rate {report.other_rate:.3f}, ratio {report.confusable_ratio:.2f}")
    elif args.command == "train":
        result, report = app.train(args.corpus, args.resume)
        print(f"final loss {result.final_loss:.4f}, checkpoint {result.checkpoint_path}")
        print(report.summary())
    elif args.command == "eval":
        reports, wavg = app.evaluate(args.checkpoint, args.splits or ["eval"], args.corpus)
        for report in reports:
            print(report.summary())
        if len(reports) > 1:
            print(f"weighted average word accuracy {wavg:.4f}")
    elif args.command == "ablate":
        seeds = [settings.train.seed + i for i in range(args.seeds)]
        print(app.ablate(args.suite, args.corpus, seeds).to_markdown())
    elif args.command == "dump-attention":
        paths = app.dump_attention(args.checkpoint, args.sample, args.query, args.corpus)
        print(f"wrote {len(paths)} heatmaps to {paths[0].parent}")
    elif args.command == "cluster-metrics":
        report, vocab = app.cluster_metrics(args.checkpoint, args.split, args.corpus)
        print(report.summary(vocab))
    elif args.command == "grad-check":
        suite = app.grad_check(args.seeds, args.cases)
        print(suite.summary())
        return 0 if suite.passed else 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        return run(args)
    except (GlyphWeaverError, OSError) as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
