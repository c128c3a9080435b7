"""Hybrid EEG classification: convolution + ReLU, Coiflet-1 features, ALPS-evolved discriminants."""

__version__ = "0.1.0"
