"""A module containing checkpoint persistence: a JSON header followed by float32 little-endian parameter blocks."""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import humanize
import numpy as np

from glyphweaver.corpus.vocabulary import Vocabulary
from glyphweaver.errors import CheckpointError
from glyphweaver.harness.optim import Adam
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.recognizer import GlyphRecognizer

logger = logging.getLogger(__name__)

MAGIC = b"GLYPHWV\x01"
FORMAT_VERSION = "glyphweaver-checkpoint/1"
KINDS = ("param", "adam_m", "adam_v")
STORAGE = np.dtype("<f4")


def snap_float32(values: np.ndarray) -> None:
    """Round an array in place to the nearest float32 value."""
    values[...] = values.astype(np.float32)


@dataclass
class Checkpoint:
    """
    Model parameters, optimizer moments, step counter and data-order rng state.
    Arrays are stored as row-major float32; `extra` carries any JSON-serializable run settings.
    """
    model_config: ModelConfig
    vocab_symbols: tuple[str, ...]
    step: int
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: Optional[dict[str, Any]] = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def capture(cls, model: GlyphRecognizer, vocab: Vocabulary, step: int,
                optimizer: Optional[Adam] = None, rng: Optional[np.random.Generator] = None,
                extra: Optional[dict[str, Any]] = None) -> "Checkpoint":
        """
        Snapshot a live model. The model and optimizer state are snapped to float32 first,
        so the in-memory run continues from exactly what a reload would see.
        """
        for _, param in model.named_parameters():
            snap_float32(param.data)
        if optimizer is not None:
            for values in (*optimizer.m.values(), *optimizer.v.values()):
                snap_float32(values)
        return cls(
            model_config=model.config,
            vocab_symbols=tuple(vocab.symbols),
            step=step,
            params=model.state_dict(),
            adam_m={k: v.copy() for k, v in optimizer.m.items()} if optimizer else {},
            adam_v={k: v.copy() for k, v in optimizer.v.items()} if optimizer else {},
            rng_state=rng.bit_generator.state if rng is not None else None,
            extra=dict(extra or {}),
        )

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.vocab_symbols)

    @property
    def has_memory(self) -> bool:
        return "memory.units" in self.params

    def _entries(self) -> list[tuple[str, str, np.ndarray]]:
        entries = [("param", name, self.params[name]) for name in sorted(self.params)]
        entries += [("adam_m", name, self.adam_m[name]) for name in sorted(self.adam_m)]
        entries += [("adam_v", name, self.adam_v[name]) for name in sorted(self.adam_v)]
        return entries

    def to_bytes(self) -> bytes:
        entries = self._entries()
        header = {
            "entries": [{"kind": kind, "name": name, "shape": list(values.shape)} for kind, name, values in entries],
            "extra": self.extra,
            "format_version": FORMAT_VERSION,
            "model_config": self.model_config.to_dict(),
            "rng_state": self.rng_state,
            "step": self.step,
            "vocab": list(self.vocab_symbols),
        }
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        blocks = b"".join(np.ascontiguousarray(values, dtype=STORAGE).tobytes() for _, _, values in entries)
        return MAGIC + struct.pack("<Q", len(encoded)) + encoded + blocks

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = self.to_bytes()
        path.write_bytes(data)
        logger.info("checkpoint step %d written to %s (%s)", self.step, path, humanize.naturalsize(len(data)))
        return path

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "Checkpoint":
        if not data.startswith(MAGIC):
            raise CheckpointError(f"{source}: not a checkpoint file")
        offset = len(MAGIC)
        try:
            (length,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            header = json.loads(data[offset:offset + length].decode("utf-8"))
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{source}: corrupt header") from e
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{source}: unsupported format {header.get('format_version')!r}")
        offset += length
        stores: dict[str, dict[str, np.ndarray]] = {kind: {} for kind in KINDS}
        for entry in header["entries"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = offset + count * STORAGE.itemsize
            if end > len(data):
                raise CheckpointError(f"{source}: truncated at {entry['kind']} {entry['name']}")
            values = np.frombuffer(data, dtype=STORAGE, count=count, offset=offset)
            stores[entry["kind"]][entry["name"]] = values.astype(np.float64).reshape(shape)
            offset = end
        if offset != len(data):
            raise CheckpointError(f"{source}: {len(data) - offset} trailing bytes")
        return cls(
            model_config=ModelConfig.from_dict(header["model_config"]),
            vocab_symbols=tuple(header["vocab"]),
            step=int(header["step"]),
            params=stores["param"],
            adam_m=stores["adam_m"],
            adam_v=stores["adam_v"],
            rng_state=header["rng_state"],
            extra=header.get("extra", {}),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Checkpoint":
        path = Path(path)
        return cls.from_bytes(path.read_bytes(), str(path))

    def restore(self, model: GlyphRecognizer, optimizer: Optional[Adam] = None,
                rng: Optional[np.random.Generator] = None) -> None:
        """Load the stored state into a model built for the same ModelConfig."""
        if model.config != self.model_config:
            raise CheckpointError("checkpoint was written for a different model configuration")
        if self.has_memory and model.memory is None:
            if optimizer is not None:
                raise CheckpointError("checkpoint holds memory units; attach them before building the optimizer")
            model.attach_memory()
        model.load_state_dict(self.params)
        if optimizer is not None and self.adam_m:
            optimizer.load_state_dict(self.adam_m, self.adam_v, self.step)
        if rng is not None and self.rng_state is not None:
            rng.bit_generator.state = self.rng_state

    def build_model(self) -> GlyphRecognizer:
        model = GlyphRecognizer(self.model_config)
        self.restore(model)
        return model
