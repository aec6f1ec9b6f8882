"""Submodule containing unit tests for GlyphWeaver loss modules."""
