"""Submodule containing the procedural glyph corpus: vocabulary, stroke prototypes, rendering and on-disk format."""
