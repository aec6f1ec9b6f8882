"""Submodule containing unit tests for GlyphWeaver model modules."""
