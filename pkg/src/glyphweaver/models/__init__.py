"""Submodule containing the recognizer: decay matrices, rotary encoding, encoder, decoder and model configs."""
