"""Calibrated fusion of global and local similarity scores for closed-set retrieval."""

__version__ = "0.1.0"
