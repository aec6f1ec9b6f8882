"""GlyphWeaver: a desk-scale character-aware text recognizer built on a numpy autograd core."""

__version__ = "0.1.0"
