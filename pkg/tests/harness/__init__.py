"""Submodule containing unit tests for GlyphWeaver harness modules."""
