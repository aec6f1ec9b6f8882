"""A module containing the end-to-end recognizer: encoder, decoder and optional memory units."""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from glyphweaver.autograd.tensor import Tensor, no_grad
from glyphweaver.losses.iicl import MemoryBank
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.decoder import DecodeOutput, RecognitionDecoder
from glyphweaver.models.encoder import CaceEncoder, EncoderOutput
from glyphweaver.models.layers import Module

logger = logging.getLogger(__name__)


@dataclass
class RecognitionOutput:
    encoded: EncoderOutput
    decoded: DecodeOutput

    @property
    def features(self) -> Tensor:
        return self.decoded.features

    @property
    def logits(self) -> Tensor:
        return self.decoded.logits


class GlyphRecognizer(Module):
    """
    Encoder and decoder built from one ModelConfig and one seed.
    The memory bank, when attached, is part of the parameter set so it is optimized and checkpointed with the model.
    """
    def __init__(self, config: ModelConfig, seed: int = 0) -> None:
        self._config = config
        rng = np.random.default_rng(seed)
        self.encoder = CaceEncoder(config, rng)
        self.decoder = RecognitionDecoder(config, rng)
        self.memory: Optional[MemoryBank] = None
        self._rng = rng
        logger.debug("recognizer built with %d parameters", self.parameter_count())

    @property
    def config(self) -> ModelConfig:
        return self._config

    def attach_memory(self, init: str = "normal") -> MemoryBank:
        if init == "classifier":
            self.memory = MemoryBank.from_classifier(self.decoder.classifier)
        else:
            self.memory = MemoryBank.random(self._config.vocab_size, self._config.fused_width, self._rng)
        return self.memory

    def forward(self, images: Union[Tensor, np.ndarray], targets: np.ndarray,
                capture_attention: bool = False) -> RecognitionOutput:
        """Teacher-forced pass returning features O, logits and the encoder output."""
        encoded = self.encoder.encode(images, capture_attention)
        return RecognitionOutput(encoded, self.decoder.decode_train(encoded.fused, targets))

    def predict(self, images: Union[Tensor, np.ndarray]) -> list[list[int]]:
        with no_grad():
            memory = self.encoder(images)
            return self.decoder.decode_greedy(memory)

    def __call__(self, images: Union[Tensor, np.ndarray], targets: np.ndarray) -> RecognitionOutput:
        return self.forward(images, targets)
