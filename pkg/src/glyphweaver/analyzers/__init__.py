"""Submodule containing diagnostics computed from trained models: attention locality, heatmaps and feature clusters."""
