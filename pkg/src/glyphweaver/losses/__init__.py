"""Submodule containing the training objectives: cross entropy, memory-unit consistency and the contrastive baseline."""
