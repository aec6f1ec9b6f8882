"""A module containing the corpus specification, the on-disk corpus writer/reader and the template calibration oracle."""

import csv
import json
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence, Union

import humanize
import numpy as np

from glyphweaver.corpus.glyphs import CONFUSABLE_PAIRS, strokes_of
from glyphweaver.corpus.pgm import read_pgm, to_bytes, write_pgm
from glyphweaver.corpus.renderer import (
    SEQUENCE_STREAM,
    DistortionRanges,
    GlyphGeometry,
    GlyphSample,
    rasterize_prototype,
    render_sample,
)
from glyphweaver.corpus.vocabulary import DESK_SYMBOLS, Vocabulary, encode_batch
from glyphweaver.errors import ConfigError, InputError
from glyphweaver.runtime import worker_threads

logger = logging.getLogger(__name__)

FORMAT_VERSION = "cfe-corpus/1"
MANIFEST_NAME = "manifest.json"
SPLITS = ("train", "eval")
# Eval seeds start here so the two splits never share a seed.
EVAL_SEED_OFFSET = 2 ** 32


@dataclass(frozen=True)
class CorpusSpec:
    """Everything that determines a corpus: classes, split sizes, geometry, label lengths, distortions and base seed."""
    symbols: tuple[str, ...] = DESK_SYMBOLS
    train_count: int = 8000
    eval_count: int = 1000
    image_size: tuple[int, int] = (32, 64)
    min_len: int = 1
    max_len: int = 5
    distortion: DistortionRanges = field(default_factory=DistortionRanges)
    base_seed: int = 0
    height_fraction: float = 0.625
    aspect: float = 0.45

    def __post_init__(self) -> None:
        for symbol in self.symbols:
            strokes_of(symbol)
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError(f"label lengths [{self.min_len}, {self.max_len}] are invalid")
        if self.train_count < 0 or self.eval_count < 0 or self.train_count >= EVAL_SEED_OFFSET:
            raise ConfigError("split counts must be non-negative and below the eval seed offset")
        needed = self.geometry.worst_case_width(self.max_len, self.distortion)
        if needed > self.image_size[1]:
            raise ConfigError(
                f"{self.max_len} glyphs may need {needed:.1f}px at maximum distortion; image width is {self.image_size[1]}"
            )

    @property
    def geometry(self) -> GlyphGeometry:
        return GlyphGeometry(self.image_size, self.height_fraction, self.aspect)

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.symbols)

    def count(self, split: str) -> int:
        return {"train": self.train_count, "eval": self.eval_count}[_check_split(split)]

    def seed_for(self, split: str, index: int) -> int:
        offset = EVAL_SEED_OFFSET if _check_split(split) == "eval" else 0
        return self.base_seed + offset + index

    def sample_symbols(self, seed: int) -> list[str]:
        """Label drawn from the seed's sequence stream: uniform length, uniform classes."""
        rng = np.random.default_rng((seed, SEQUENCE_STREAM))
        length = int(rng.integers(self.min_len, self.max_len + 1))
        return [self.symbols[i] for i in rng.integers(0, len(self.symbols), size=length)]

    def render(self, seed: int, symbols: Optional[Sequence[str]] = None) -> GlyphSample:
        symbols = self.sample_symbols(seed) if symbols is None else list(symbols)
        return render_sample(symbols, seed, self.geometry, self.distortion)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "CorpusSpec":
        values = dict(values)
        distortion = DistortionRanges(**values.pop("distortion", {}))
        values["symbols"] = tuple(values.get("symbols", DESK_SYMBOLS))
        values["image_size"] = tuple(values.get("image_size", (32, 64)))
        return cls(distortion=distortion, **values)


def _check_split(split: str) -> str:
    if split not in SPLITS:
        raise InputError(f"unknown split {split!r}; expected one of {SPLITS}")
    return split


@dataclass
class CorpusManifest:
    spec: CorpusSpec
    class_counts: dict[str, dict[str, int]]
    sample_counts: dict[str, int]
    format_version: str = FORMAT_VERSION

    def to_json(self) -> str:
        payload = {
            "class_counts": self.class_counts,
            "format_version": self.format_version,
            "sample_counts": self.sample_counts,
            "spec": self.spec.to_dict(),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CorpusManifest":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported corpus format {payload.get('format_version')!r}")
        return cls(CorpusSpec.from_dict(payload["spec"]), payload["class_counts"], payload["sample_counts"])


def generate_corpus(spec: CorpusSpec, out_dir: Union[str, Path], threads: Optional[int] = None) -> CorpusManifest:
    """
    Render both splits and write them to disk.

    Layout: <out>/<split>/images/<id>.pgm, <out>/<split>/index.tsv with one
    `sample_id<TAB>label<TAB>seed<TAB>filename` record per line, and <out>/manifest.json.

    Args:
        spec: Corpus specification
        out_dir: Destination directory (created if missing)
        threads: Rendering workers; defaults to the CFE_THREADS setting

    Returns:
        The manifest that was written
    """
    out_dir = Path(out_dir)
    threads = threads or worker_threads()
    started = time.monotonic()
    class_counts: dict[str, dict[str, int]] = {}
    sample_counts: dict[str, int] = {}
    for split in SPLITS:
        split_dir = out_dir / split
        (split_dir / "images").mkdir(parents=True, exist_ok=True)
        seeds = [spec.seed_for(split, index) for index in range(spec.count(split))]
        counter: Counter[str] = Counter()
        with ThreadPoolExecutor(max_workers=threads) as pool, \
                open(split_dir / "index.tsv", "w", encoding="utf-8", newline="") as index_file:
            writer = csv.writer(index_file, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE)
            # map() yields in submission order, so files are written in index order.
            for index, sample in enumerate(pool.map(spec.render, seeds)):
                sample_id = f"{split}-{index:06d}"
                filename = f"images/{sample_id}.pgm"
                write_pgm(split_dir / filename, to_bytes(sample.image))
                writer.writerow([sample_id, sample.label, sample.seed, filename])
                counter.update(sample.label)
        class_counts[split] = {symbol: counter.get(symbol, 0) for symbol in spec.symbols}
        sample_counts[split] = len(seeds)
        logger.info("rendered %s %s samples", humanize.intcomma(len(seeds)), split)

    manifest = CorpusManifest(spec, class_counts, sample_counts)
    (out_dir / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    logger.info("corpus written to %s in %s", out_dir, humanize.precisedelta(time.monotonic() - started))
    return manifest


@dataclass
class GlyphDataset:
    """In-memory split: (N, H, W, 1) images in [0, 1] with their labels and seeds."""
    images: np.ndarray
    labels: list[str]
    seeds: list[int]
    name: str = "split"

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[tuple[np.ndarray, str]]:
        return zip(self.images, self.labels)

    @classmethod
    def open(cls, root: Union[str, Path], split: str) -> "GlyphDataset":
        split_dir = Path(root) / _check_split(split)
        images, labels, seeds = [], [], []
        with open(split_dir / "index.tsv", encoding="utf-8", newline="") as index_file:
            for row in csv.reader(index_file, delimiter="\t", quoting=csv.QUOTE_NONE):
                _, label, seed, filename = row
                images.append(read_pgm(split_dir / filename).astype(np.float64) / 255.0)
                labels.append(label)
                seeds.append(int(seed))
        stacked = np.stack(images)[..., None] if images else np.zeros((0, 0, 0, 1))
        logger.debug("loaded %s samples from %s", humanize.intcomma(len(labels)), split_dir)
        return cls(stacked, labels, seeds, split)

    @classmethod
    def from_samples(cls, samples: Sequence[GlyphSample], name: str = "split") -> "GlyphDataset":
        """Quantize rendered samples exactly as generate_corpus stores them."""
        images = np.stack([to_bytes(s.image).astype(np.float64) / 255.0 for s in samples]) if samples else np.zeros((0, 0, 0, 1))
        return cls(images, [s.label for s in samples], [s.seed for s in samples], name)

    @classmethod
    def render(cls, spec: CorpusSpec, split: str, count: Optional[int] = None) -> "GlyphDataset":
        count = spec.count(split) if count is None else count
        return cls.from_samples([spec.render(spec.seed_for(split, i)) for i in range(count)], split)

    def subset(self, indices: Sequence[int]) -> "GlyphDataset":
        indices = list(indices)
        return GlyphDataset(self.images[indices], [self.labels[i] for i in indices],
                            [self.seeds[i] for i in indices], self.name)

    def batch(self, indices: Sequence[int], vocab: Vocabulary, max_len: int) -> tuple[np.ndarray, np.ndarray]:
        """Images (B, H, W, 1) and encoded targets (B, T) for the given sample indices."""
        indices = list(indices)
        return self.images[indices], encode_batch([self.labels[i] for i in indices], vocab, max_len)


@dataclass
class CalibrationReport:
    """Template-matcher statistics over single-glyph renders at the corpus distortion ranges."""
    symbols: tuple[str, ...]
    confusion: np.ndarray
    rank1_rate: float
    confusable_rate: float
    other_rate: float
    pixel_difference: float

    @property
    def confusable_ratio(self) -> float:
        if self.other_rate == 0:
            return float("inf") if self.confusable_rate > 0 else float("nan")
        return self.confusable_rate / self.other_rate


def _normalized(image: np.ndarray) -> np.ndarray:
    centered = image - image.mean()
    norm = np.linalg.norm(centered)
    return centered / norm if norm > 0 else centered


def template_scores(image: np.ndarray, templates: np.ndarray, max_shift: int = 2) -> np.ndarray:
    """Best normalized correlation of `image` with every template over integer shifts up to max_shift."""
    image = _normalized(image)
    best = np.full(len(templates), -np.inf)
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            shifted = np.roll(image, (dy, dx), axis=(0, 1))
            best = np.maximum(best, (templates * shifted).sum(axis=(1, 2)))
    return best


def calibrate_corpus(spec: CorpusSpec, samples_per_class: int = 50, max_shift: int = 2,
                     seed_offset: int = 3 * EVAL_SEED_OFFSET) -> CalibrationReport:
    """
    Measure whether the corpus carries both kinds of difficulty: a fixed template matcher should
    still find each distorted glyph's own class while confusing designated pairs more often than others.
    """
    symbols = spec.symbols
    geometry = spec.geometry
    templates = np.stack([_normalized(rasterize_prototype([s], geometry, spec.distortion)) for s in symbols])
    confusion = np.zeros((len(symbols), len(symbols)), dtype=np.int64)
    differences = []
    for k, symbol in enumerate(symbols):
        previous: Optional[np.ndarray] = None
        for n in range(samples_per_class):
            seed = spec.base_seed + seed_offset + k * samples_per_class + n
            image = render_sample([symbol], seed, geometry, spec.distortion).image[..., 0]
            confusion[k, int(np.argmax(template_scores(image, templates, max_shift)))] += 1
            quantized = to_bytes(image)
            if previous is not None:
                differences.append(float(np.mean(quantized != previous)))
            previous = quantized

    index = {s: i for i, s in enumerate(symbols)}
    pairs = [(index[a], index[b]) for a, b in CONFUSABLE_PAIRS if a in index and b in index]
    pair_set = {frozenset(p) for p in pairs}
    confusable = [confusion[a, b] + confusion[b, a] for a, b in pairs]
    others = [
        confusion[a, b] + confusion[b, a]
        for a in range(len(symbols)) for b in range(a + 1, len(symbols))
        if frozenset((a, b)) not in pair_set
    ]
    per_pair = 2 * samples_per_class
    return CalibrationReport(
        symbols=symbols,
        confusion=confusion,
        rank1_rate=float(np.trace(confusion) / confusion.sum()),
        confusable_rate=float(np.mean(confusable) / per_pair) if confusable else 0.0,
        other_rate=float(np.mean(others) / per_pair) if others else 0.0,
        pixel_difference=float(np.mean(differences)) if differences else 0.0,
    )
