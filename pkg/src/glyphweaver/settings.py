"""A module containing the flat `section.key = value` settings file loader and the settings bundle."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

from glyphweaver.corpus.generator import CorpusSpec
from glyphweaver.corpus.renderer import DistortionRanges
from glyphweaver.corpus.vocabulary import DESK_SYMBOLS, PRINTABLE_SYMBOLS, Vocabulary
from glyphweaver.errors import ConfigError
from glyphweaver.harness.evaluator import EvalConfig
from glyphweaver.harness.trainer import TrainConfig
from glyphweaver.losses.schedule import LossConfig
from glyphweaver.models.config import PRESETS, ModelConfig

logger = logging.getLogger(__name__)

VARIANTS = (*PRESETS, "custom")
DEFAULT_VARIANT = "desk"

# Training defaults per variant; desk-scale batches use a smaller lr reference batch.
TRAIN_PRESETS: dict[str, TrainConfig] = {
    "desk": TrainConfig(epochs=20, batch_size=64, lr_reference_batch=64, log_every=25),
    "micro": TrainConfig(epochs=5, batch_size=8, lr_reference_batch=8, log_every=10),
}
# Corpus defaults per variant; the micro image only fits three glyphs.
CORPUS_PRESETS: dict[str, dict[str, Any]] = {
    "micro": {"train_count": 64, "eval_count": 32, "max_len": 3},
}


@dataclass(frozen=True)
class Settings:
    """Every configuration concern of one run."""
    variant: str = DEFAULT_VARIANT
    model: ModelConfig = field(default_factory=lambda: PRESETS[DEFAULT_VARIANT])
    train: TrainConfig = field(default_factory=lambda: TRAIN_PRESETS[DEFAULT_VARIANT])
    loss: LossConfig = field(default_factory=LossConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)

    @property
    def vocabulary(self) -> Vocabulary:
        return self.corpus.vocabulary


def parse_value(raw: str) -> Any:
    """int, float, true/false, a comma-separated list of those, or the bare string."""
    text = raw.strip()
    if "," in text:
        return tuple(parse_value(part) for part in text.split(",") if part.strip())
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            pass
    return text


def parse_settings_text(text: str, source: str = "<text>") -> dict[str, Any]:
    """
    Parse `section.key = value` lines; `#` starts a comment, blank lines are ignored.

    Returns:
        Mapping of dotted keys to parsed values, in file order
    """
    values: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or "." not in key or not raw.strip():
            raise ConfigError(f"{source}:{number}: expected 'section.key = value', got {line!r}")
        values[key] = parse_value(raw)
    return values


def _tuple(value: Any) -> tuple:
    return value if isinstance(value, tuple) else (value,)


def _optional(value: Any) -> Any:
    return None if isinstance(value, str) and value.lower() == "none" else value


def _flag(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError("expected true or false")
    return value


def _symbols(value: Any) -> tuple[str, ...]:
    if value == "desk":
        return DESK_SYMBOLS
    if value == "printable":
        return PRINTABLE_SYMBOLS
    if isinstance(value, str):
        return tuple(value)
    return tuple(str(v) for v in _tuple(value))


def _distortion(value: Any) -> DistortionRanges:
    if value == "max":
        return DistortionRanges()
    if value == "none":
        return DistortionRanges.none()
    raise ConfigError(f"corpus.distortion must be 'max' or 'none', got {value!r}")


# section.key -> (target, attribute, converter)
_MODEL_KEYS = {
    "model.stage_widths": ("stage_widths", _tuple),
    "model.stage_depths": ("stage_depths", _tuple),
    "model.stage_heads": ("stage_heads", _tuple),
    "model.fused_width": ("fused_width", int),
    "model.decay_order": ("decay_order", _tuple),
    "model.mlp_ratio": ("mlp_ratio", int),
    "model.image_size": ("image_size", _tuple),
    "model.decoder_layers": ("decoder_layers", int),
    "model.max_label_len": ("max_label_len", int),
    "model.use_decay": ("use_decay", _flag),
    "model.use_fusion": ("use_fusion", _flag),
    "attn.scale_mode": ("scale_mode", str),
    "pos.base_freq": ("base_freq", float),
}
_DECAY_KEYS = {
    "decay.option": ("option", int),
    "decay.window_w": ("window_w", int),
    "decay.window_h": ("window_h", int),
    "decay.gammas": ("gammas", lambda v: None if _optional(v) is None else tuple(float(g) for g in _tuple(v))),
}
_LOSS_KEYS = {
    "loss.lambda": ("lambda_", float),
    "loss.delta": ("delta", float),
    "loss.activation_fraction": ("activation_fraction", float),
    "loss.contrastive": ("contrastive", str),
    "loss.cc_temperature": ("cc_temperature", float),
    "loss.memory_init": ("memory_init", str),
}
_TRAIN_KEYS = {
    "train.epochs": ("epochs", int),
    "train.warmup_fraction": ("warmup_fraction", float),
    "train.base_lr": ("base_lr", float),
    "train.batch_size": ("batch_size", int),
    "train.lr_reference_batch": ("lr_reference_batch", int),
    "train.seed": ("seed", int),
    "train.beta1": ("beta1", float),
    "train.beta2": ("beta2", float),
    "train.eps": ("eps", float),
    "train.clip_norm": ("clip_norm", lambda v: None if _optional(v) is None else float(v)),
    "train.log_every": ("log_every", int),
}
_EVAL_KEYS = {
    "eval.batch_size": ("batch_size", int),
    "eval.fold_case_36": ("fold_case_36", _flag),
    "eval.threads": ("threads", lambda v: None if _optional(v) is None else int(v)),
}
_CORPUS_KEYS = {
    "corpus.symbols": ("symbols", _symbols),
    "corpus.train_count": ("train_count", int),
    "corpus.eval_count": ("eval_count", int),
    "corpus.min_len": ("min_len", int),
    "corpus.max_len": ("max_len", int),
    "corpus.base_seed": ("base_seed", int),
    "corpus.height_fraction": ("height_fraction", float),
    "corpus.aspect": ("aspect", float),
    "corpus.distortion": ("distortion", _distortion),
}
KNOWN_KEYS = frozenset(
    {"model.variant", *_MODEL_KEYS, *_DECAY_KEYS, *_LOSS_KEYS, *_TRAIN_KEYS, *_EVAL_KEYS, *_CORPUS_KEYS}
)


def _collect(values: Mapping[str, Any], table: Mapping[str, tuple[str, Callable[[Any], Any]]]) -> dict[str, Any]:
    out = {}
    for key, (attribute, convert) in table.items():
        if key in values:
            try:
                out[attribute] = convert(values[key])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{key}: cannot use {values[key]!r} ({e})") from None
    return out


def build_settings(values: Mapping[str, Any], variant: Optional[str] = None, seed: Optional[int] = None) -> Settings:
    """
    Turn parsed `section.key` values into a validated Settings bundle.

    Args:
        values: Parsed keys (see parse_settings_text)
        variant: Model preset overriding model.variant
        seed: Training seed overriding train.seed

    Returns:
        Settings; the model vocabulary size follows the corpus symbols and the corpus
        image size follows the model
    """
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown settings keys: {', '.join(unknown)}")
    name = variant or values.get("model.variant", DEFAULT_VARIANT)
    if name not in VARIANTS:
        raise ConfigError(f"model.variant must be one of {VARIANTS}, got {name!r}")

    base = ModelConfig() if name == "custom" else PRESETS[name]
    decay = replace(base.decay, **_collect(values, _DECAY_KEYS))
    corpus_values = {**CORPUS_PRESETS.get(name, {}), **_collect(values, _CORPUS_KEYS)}
    symbols = corpus_values.get("symbols", DESK_SYMBOLS)
    model = replace(base, decay=decay, vocab_size=Vocabulary(symbols).size, **_collect(values, _MODEL_KEYS))

    train = replace(TRAIN_PRESETS.get(name, TrainConfig()), **_collect(values, _TRAIN_KEYS))
    if seed is not None:
        train = replace(train, seed=seed)
    corpus = CorpusSpec(image_size=model.image_size, **corpus_values)
    if corpus.max_len > model.max_label_len - 1:
        raise ConfigError(
            f"corpus.max_len {corpus.max_len} leaves no room for [EOS] within model.max_label_len {model.max_label_len}"
        )
    return Settings(
        variant=name,
        model=model,
        train=train,
        loss=replace(LossConfig(), **_collect(values, _LOSS_KEYS)),
        eval=replace(EvalConfig(), **_collect(values, _EVAL_KEYS)),
        corpus=corpus,
    )


def load_settings(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None,
                  variant: Optional[str] = None, seed: Optional[int] = None) -> Settings:
    """Read a settings file (optional), apply dotted-key overrides and the CLI variant/seed flags."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_settings_text(Path(path).read_text(encoding="utf-8"), str(path)))
        logger.debug("read %d settings from %s", len(values), path)
    values.update(overrides or {})
    return build_settings(values, variant, seed)
