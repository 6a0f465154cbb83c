"""Frequency-constrained unit commitment with an embedded sparse ReLU predictor."""

__version__ = "0.1.0"
