"""A module containing the symbol vocabulary and label encoding."""

import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from glyphweaver.errors import InputError, VocabError

PAD_TOKEN, BOS_TOKEN, EOS_TOKEN = "[PAD]", "[BOS]", "[EOS]"
PAD_ID, BOS_ID, EOS_ID = 0, 1, 2
SPECIAL_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN)

# 94 printable ASCII symbols without whitespace
PRINTABLE_SYMBOLS = tuple(chr(code) for code in range(33, 127))
DESK_SYMBOLS = ("O", "Q", "T", "1", "X", "*", "H", "K", "Y", "+", "=", "Z", "N", "7", "L", "F")


@dataclass(frozen=True)
class Vocabulary:
    """
    Ordered symbol set. Ids 0, 1, 2 are [PAD], [BOS], [EOS]; characters follow in the given order.
    """
    symbols: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if len(set(self.symbols)) != len(self.symbols):
            raise VocabError("vocabulary symbols must be unique")
        if any(len(symbol) != 1 for symbol in self.symbols):
            raise VocabError("vocabulary symbols must be single characters")
        object.__setattr__(self, "_index", {s: i + len(SPECIAL_TOKENS) for i, s in enumerate(self.symbols)})

    @classmethod
    def printable(cls) -> "Vocabulary":
        return cls(PRINTABLE_SYMBOLS)

    @classmethod
    def desk(cls) -> "Vocabulary":
        return cls(DESK_SYMBOLS)

    @property
    def size(self) -> int:
        return len(self.symbols) + len(SPECIAL_TOKENS)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def id_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise VocabError(f"symbol {symbol!r} is not in the vocabulary") from None

    def symbol_of(self, token_id: int) -> str:
        if 0 <= token_id < len(SPECIAL_TOKENS):
            return SPECIAL_TOKENS[token_id]
        if not 0 <= token_id < self.size:
            raise VocabError(f"id {token_id} is outside a vocabulary of size {self.size}")
        return self.symbols[token_id - len(SPECIAL_TOKENS)]

    def character_ids(self) -> range:
        return range(len(SPECIAL_TOKENS), self.size)


def encode_label(text: str, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """
    Encode a label as ids followed by [EOS] and [PAD] up to max_len.

    Args:
        text: Label string; every character must be in the vocabulary
        vocab: Vocabulary to encode with
        max_len: Decoder length T; the label may use at most T - 1 positions

    Returns:
        int64 array of length max_len
    """
    if len(text) > max_len - 1:
        raise InputError(f"label {text!r} has {len(text)} symbols but at most {max_len - 1} fit before [EOS]")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[:len(text)] = [vocab.id_of(symbol) for symbol in text]
    ids[len(text)] = EOS_ID
    return ids


def encode_batch(texts: Sequence[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    return np.stack([encode_label(text, vocab, max_len) for text in texts]) if texts else np.zeros((0, max_len), np.int64)


def decode_label(ids: Iterable[int], vocab: Vocabulary) -> str:
    """Inverse of encode_label: characters up to the first [EOS]; [PAD] and [BOS] are skipped."""
    out = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id == EOS_ID:
            break
        if token_id in (PAD_ID, BOS_ID):
            continue
        out.append(vocab.symbol_of(token_id))
    return "".join(out)


_FOLD_KEEP = frozenset(string.ascii_lowercase + string.digits)


def fold_case_36(text: str) -> str:
    """Lowercase and drop everything outside [0-9a-z]."""
    return "".join(ch for ch in text.lower() if ch in _FOLD_KEEP)
