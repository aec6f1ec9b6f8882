"""Submodule containing the tensor core: reverse-mode tape, differentiable ops and the gradient oracle."""
