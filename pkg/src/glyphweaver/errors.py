"""A module containing the exception hierarchy shared by every GlyphWeaver subpackage."""

from pathlib import Path
from typing import Optional


class GlyphWeaverError(Exception):
    """Base class for all errors raised by GlyphWeaver."""


class DimensionError(GlyphWeaverError, ValueError):
    """Raised when tensor shapes are incompatible for an operation."""


class ConfigError(GlyphWeaverError, ValueError):
    """Raised for invalid hyperparameters, config keys or config values."""


class InputError(GlyphWeaverError, ValueError):
    """Raised for invalid call-time data such as over-long labels or empty splits."""


class VocabError(InputError):
    """Raised when a symbol is not part of the vocabulary."""


class LayoutError(InputError):
    """Raised when a glyph sequence cannot be laid out inside the image width."""


class OracleInvalidError(GlyphWeaverError, RuntimeError):
    """Raised when a gradient-check target or an ablation data order is not deterministic."""


class CheckpointError(GlyphWeaverError, ValueError):
    """Raised for corrupt checkpoints or checkpoints built for another model configuration."""


class DivergenceError(GlyphWeaverError, RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, message: str, last_checkpoint: Optional[Path] = None) -> None:
        if last_checkpoint is not None:
            message = f"{message} (last good checkpoint: {last_checkpoint})"
        else:
            message = f"{message} (no checkpoint written yet)"
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
