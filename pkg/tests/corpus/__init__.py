"""Submodule containing unit tests for GlyphWeaver corpus modules."""
