"""Submodule containing unit tests for GlyphWeaver analyzer modules."""
