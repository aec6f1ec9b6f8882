"""A module containing the stroke prototypes of the desk glyph classes."""

from itertools import combinations

import numpy as np

from glyphweaver.errors import VocabError

# Segments on a 3x3 lattice in glyph-local (x, y) coordinates, y pointing down.
LATTICE_SEGMENTS: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "a1": ((0.0, 0.0), (0.5, 0.0)),
    "a2": ((0.5, 0.0), (1.0, 0.0)),
    "g1": ((0.0, 0.5), (0.5, 0.5)),
    "g2": ((0.5, 0.5), (1.0, 0.5)),
    "d1": ((0.0, 1.0), (0.5, 1.0)),
    "d2": ((0.5, 1.0), (1.0, 1.0)),
    "f": ((0.0, 0.0), (0.0, 0.5)),
    "e": ((0.0, 0.5), (0.0, 1.0)),
    "b": ((1.0, 0.0), (1.0, 0.5)),
    "c": ((1.0, 0.5), (1.0, 1.0)),
    "i": ((0.5, 0.0), (0.5, 0.5)),
    "l": ((0.5, 0.5), (0.5, 1.0)),
    "dul": ((0.5, 0.5), (0.0, 0.0)),
    "dur": ((0.5, 0.5), (1.0, 0.0)),
    "dll": ((0.5, 0.5), (0.0, 1.0)),
    "dlr": ((0.5, 0.5), (1.0, 1.0)),
}

_RING = frozenset({"a1", "a2", "b", "c", "d1", "d2", "e", "f"})
_CROSS = frozenset({"dul", "dur", "dll", "dlr"})

GLYPH_STROKES: dict[str, frozenset[str]] = {
    "O": _RING,
    "Q": _RING | {"dlr"},
    "T": frozenset({"a1", "a2", "i", "l"}),
    "1": frozenset({"a1", "i", "l"}),
    "X": _CROSS,
    "*": _CROSS | {"i"},
    "H": frozenset({"f", "e", "b", "c", "g1", "g2"}),
    "K": frozenset({"f", "e", "dur", "dlr"}),
    "Y": frozenset({"dul", "dur", "l"}),
    "+": frozenset({"g1", "g2", "i", "l"}),
    "=": frozenset({"g1", "g2", "d1", "d2"}),
    "Z": frozenset({"a1", "a2", "dur", "dll", "d1", "d2"}),
    "N": frozenset({"f", "e", "dul", "dlr", "b", "c"}),
    "7": frozenset({"a1", "a2", "b", "c"}),
    "L": frozenset({"f", "e", "d1", "d2"}),
    "F": frozenset({"a1", "a2", "f", "e", "g1"}),
}

# Pairs built to share most of their strokes.
CONFUSABLE_PAIRS: tuple[tuple[str, str], ...] = (("O", "Q"), ("T", "1"), ("X", "*"))


def strokes_of(symbol: str) -> frozenset[str]:
    try:
        return GLYPH_STROKES[symbol]
    except KeyError:
        raise VocabError(f"no stroke prototype for symbol {symbol!r}") from None


def prototype_segments(symbol: str) -> np.ndarray:
    """Segments of a glyph as an (S, 2, 2) array of endpoint pairs, in sorted segment-name order."""
    return np.array([LATTICE_SEGMENTS[name] for name in sorted(strokes_of(symbol))], dtype=np.float64)


def jaccard(first: str, second: str) -> float:
    """Shared-stroke fraction |A & B| / |A | B| of two prototypes."""
    a, b = strokes_of(first), strokes_of(second)
    return len(a & b) / len(a | b)


def pair_overlaps(symbols: tuple[str, ...]) -> dict[tuple[str, str], float]:
    return {(a, b): jaccard(a, b) for a, b in combinations(symbols, 2)}
