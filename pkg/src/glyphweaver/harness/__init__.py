"""Submodule containing the training and evaluation harness: optimizer, checkpoints, data loading, trainer, evaluator and ablations."""
