"""A module containing the model hyperparameters and the named model presets."""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Optional

from glyphweaver.errors import ConfigError
from glyphweaver.models.decay import DecaySpec, gamma_schedule

SCALE_MODES = ("sqrt_d", "d")


@dataclass(frozen=True)
class DecayConfig:
    """Config-level decay settings, resolved into a DecaySpec per stage head count."""
    option: int = 2
    window_w: int = 5
    window_h: int = 3
    gammas: Optional[tuple[float, ...]] = None

    def spec_for(self, num_heads: int) -> DecaySpec:
        if self.gammas is None:
            gammas = gamma_schedule(num_heads)
        elif len(self.gammas) == 1:
            gammas = [self.gammas[0]] * num_heads
        elif len(self.gammas) >= num_heads:
            gammas = list(self.gammas[:num_heads])
        else:
            raise ConfigError(f"decay.gammas lists {len(self.gammas)} values but a stage has {num_heads} heads")
        return DecaySpec(self.option, tuple(float(g) for g in gammas), (self.window_w, self.window_h))


@dataclass(frozen=True)
class ModelConfig:
    """Encoder/decoder hyperparameters; decay_order (x, y) applies D to the first x blocks."""
    stage_widths: tuple[int, int, int] = (64, 128, 256)
    stage_depths: tuple[int, int, int] = (3, 6, 3)
    stage_heads: tuple[int, int, int] = (2, 4, 8)
    fused_width: int = 128
    decay_order: tuple[int, int] = (6, 6)
    mlp_ratio: int = 4
    image_size: tuple[int, int] = (32, 128)
    decoder_layers: int = 1
    max_label_len: int = 25
    vocab_size: int = 97
    decay: DecayConfig = field(default_factory=DecayConfig)
    base_freq: float = 10000.0
    scale_mode: str = "sqrt_d"
    use_decay: bool = True
    use_fusion: bool = True

    def __post_init__(self) -> None:
        if not (len(self.stage_widths) == len(self.stage_depths) == len(self.stage_heads) == 3):
            raise ConfigError("stage_widths, stage_depths and stage_heads need exactly three entries")
        x, y = self.decay_order
        if x < 0 or y < 0 or x + y != self.total_blocks:
            raise ConfigError(f"decay order {x}-{y} must split all {self.total_blocks} blocks")
        for width, heads in zip(self.stage_widths, self.stage_heads):
            if heads < 1 or width % heads:
                raise ConfigError(f"stage width {width} is not divisible by {heads} heads")
            if (width // heads) % 4:
                raise ConfigError(f"per-head dim {width // heads} must split into two even axial halves")
        height, width = self.image_size
        if height % 16 or width % 4:
            raise ConfigError(f"image size {self.image_size} needs H divisible by 16 and W by 4")
        if self.scale_mode not in SCALE_MODES:
            raise ConfigError(f"attn.scale_mode must be one of {SCALE_MODES}, got {self.scale_mode!r}")
        if self.max_label_len < 2:
            raise ConfigError("max_label_len must leave room for at least one symbol and [EOS]")
        if self.decoder_layers < 1 or self.mlp_ratio < 1:
            raise ConfigError("decoder_layers and mlp_ratio must be positive")

    @property
    def total_blocks(self) -> int:
        return sum(self.stage_depths)

    @property
    def decoder_heads(self) -> int:
        """Stage-3 head count, or the largest divisor of fused_width below it."""
        heads = self.stage_heads[-1]
        while self.fused_width % heads:
            heads -= 1
        return heads

    def uses_decay(self, block_number: int) -> bool:
        """Global 1-based block numbering across stages."""
        return self.use_decay and block_number <= self.decay_order[0]

    def token_counts(self) -> tuple[int, int, int]:
        height, width = self.image_size
        area = height * width
        return area // 16, area // 32, area // 64

    def fused_tokens(self) -> int:
        f1, f2, f3 = self.token_counts()
        return f1 + f2 + f3 if self.use_fusion else f3

    def reduced(self, divisor: int) -> "ModelConfig":
        """Same topology with every width divided by `divisor` (for fast instantiation)."""
        return replace(
            self,
            stage_widths=tuple(w // divisor for w in self.stage_widths),
            fused_width=self.fused_width // divisor,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "ModelConfig":
        values = dict(values)
        decay = dict(values.pop("decay", {}))
        if decay.get("gammas") is not None:
            decay["gammas"] = tuple(decay["gammas"])
        for key in ("stage_widths", "stage_depths", "stage_heads", "decay_order", "image_size"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(decay=DecayConfig(**decay), **values)

    @classmethod
    def variant(cls, name: str, **overrides: Any) -> "ModelConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown model variant {name!r}; choose from {sorted(PRESETS)}")
        return replace(PRESETS[name], **overrides)


PRESETS: dict[str, ModelConfig] = {
    "tiny": ModelConfig((64, 128, 256), (3, 6, 3), (2, 4, 8), 128, (6, 6)),
    "small": ModelConfig((96, 192, 256), (3, 6, 6), (3, 6, 8), 192, (8, 7)),
    "base": ModelConfig((128, 256, 384), (3, 6, 9), (4, 8, 12), 256, (8, 10)),
    "desk": ModelConfig(
        (32, 64, 96), (1, 2, 1), (2, 4, 6), 64, (2, 2),
        image_size=(32, 64), max_label_len=8, vocab_size=19,
    ),
    "micro": ModelConfig(
        (8, 16, 16), (1, 1, 1), (2, 2, 2), 16, (2, 1),
        mlp_ratio=2, image_size=(16, 32), max_label_len=4, vocab_size=19,
    ),
}
