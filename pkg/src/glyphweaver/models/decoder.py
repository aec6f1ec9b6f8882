"""A module containing the autoregressive recognition decoder."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from glyphweaver.autograd.tensor import MASK_VALUE, Tensor, no_grad, softmax_lastdim
from glyphweaver.corpus.vocabulary import BOS_ID, EOS_ID, PAD_ID
from glyphweaver.errors import DimensionError, InputError
from glyphweaver.models.config import ModelConfig
from glyphweaver.models.layers import Embedding, LayerNorm, Linear, Mlp, Module, parameter


def causal_mask(length: int) -> np.ndarray:
    """Additive (length, length) mask hiding every position after the query."""
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


@dataclass
class DecodeOutput:
    """Recognition features O (B, T, C), taken before the classifier, and logits (B, T, V)."""
    features: Tensor
    logits: Tensor


class MultiHeadAttention(Module):
    """Standard scaled dot-product attention with separate query and memory inputs."""
    def __init__(self, width: int, heads: int, rng: np.random.Generator) -> None:
        self.heads = heads
        self.head_dim = width // heads
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.output = Linear(width, width, rng)

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, memory: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        q, k, v = self._split(self.query(x)), self._split(self.key(memory)), self._split(self.value(memory))
        logits = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(self.head_dim))
        if mask is not None:
            logits = logits + mask
        mixed = softmax_lastdim(logits) @ v
        batch, length, width = x.shape
        return self.output(mixed.transpose(0, 2, 1, 3).reshape(batch, length, width))


class DecoderLayer(Module):
    """Pre-norm causal self-attention, cross-attention over encoder tokens, then MLP."""
    def __init__(self, width: int, heads: int, mlp_ratio: int, rng: np.random.Generator) -> None:
        self.norm1 = LayerNorm(width)
        self.self_attention = MultiHeadAttention(width, heads, rng)
        self.norm2 = LayerNorm(width)
        self.cross_attention = MultiHeadAttention(width, heads, rng)
        self.norm3 = LayerNorm(width)
        self.mlp = Mlp(width, mlp_ratio, rng)

    def __call__(self, x: Tensor, memory: Tensor) -> Tensor:
        normed = self.norm1(x)
        x = x + self.self_attention(normed, normed, causal_mask(x.shape[1]))
        x = x + self.cross_attention(self.norm2(x), memory)
        return x + self.mlp(self.norm3(x))


class RecognitionDecoder(Module):
    """
    Transformer decoder over learned token embeddings and learned absolute positions.
    Training uses teacher forcing on [BOS] + targets[:-1]; inference decodes greedily.
    """
    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        width = config.fused_width
        self.max_len = config.max_label_len
        self.vocab_size = config.vocab_size
        self.embedding = Embedding(config.vocab_size, width, rng)
        self.positions = parameter(rng.normal(0.0, 1.0 / math.sqrt(width), size=(config.max_label_len, width)))
        self.layers = [
            DecoderLayer(width, config.decoder_heads, config.mlp_ratio, rng) for _ in range(config.decoder_layers)
        ]
        self.final_norm = LayerNorm(width)
        self.classifier = Linear(width, config.vocab_size, rng)

    def forward(self, memory: Tensor, inputs: np.ndarray) -> DecodeOutput:
        """Run the decoder on input ids (B, t) with t <= T; position p only sees inputs <= p."""
        batch, length = inputs.shape
        if memory.ndim != 3 or memory.shape[0] != batch:
            raise DimensionError(f"memory {memory.shape} does not match an input batch of {batch}")
        x = self.embedding(inputs) + self.positions[:length]
        for layer in self.layers:
            x = layer(x, memory)
        features = self.final_norm(x)
        return DecodeOutput(features, self.classifier(features))

    def teacher_inputs(self, targets: np.ndarray) -> np.ndarray:
        """Targets (B, t) padded to T and right-shifted behind [BOS]."""
        targets = self.pad_targets(targets)
        inputs = np.empty_like(targets)
        inputs[:, 0] = BOS_ID
        inputs[:, 1:] = targets[:, :-1]
        return inputs

    def pad_targets(self, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        if targets.ndim != 2:
            raise DimensionError(f"targets must be (B, T), got {targets.shape}")
        if targets.shape[1] > self.max_len:
            raise InputError(f"targets of length {targets.shape[1]} exceed the decoder length {self.max_len}")
        if targets.size and (targets.min() < 0 or targets.max() >= self.vocab_size):
            raise InputError(f"target ids must lie in [0, {self.vocab_size})")
        padding = self.max_len - targets.shape[1]
        return np.pad(targets, ((0, 0), (0, padding)), constant_values=PAD_ID) if padding else targets

    def decode_train(self, memory: Tensor, targets: np.ndarray) -> DecodeOutput:
        return self.forward(memory, self.teacher_inputs(targets))

    def decode_greedy(self, memory: Tensor) -> list[list[int]]:
        """
        Feed argmax tokens back from [BOS] until [EOS] or T steps.
        [PAD] and [BOS] are never emitted; the returned sequences exclude [EOS].
        """
        batch = memory.shape[0]
        inputs = np.full((batch, 1), BOS_ID, dtype=np.int64)
        finished = np.zeros(batch, dtype=bool)
        sequences: list[list[int]] = [[] for _ in range(batch)]
        with no_grad():
            for _ in range(self.max_len):
                logits = self.forward(memory, inputs).logits.data[:, -1].copy()
                logits[:, [PAD_ID, BOS_ID]] = -np.inf
                tokens = logits.argmax(axis=-1)
                for i, token in enumerate(tokens):
                    if finished[i]:
                        continue
                    if token == EOS_ID:
                        finished[i] = True
                    else:
                        sequences[i].append(int(token))
                if finished.all():
                    break
                inputs = np.concatenate([inputs, tokens[:, None]], axis=1)
        return sequences

    def __call__(self, memory: Tensor, targets: np.ndarray) -> DecodeOutput:
        return self.decode_train(memory, targets)
