"""Submodule containing unit tests for GlyphWeaver autograd modules."""
