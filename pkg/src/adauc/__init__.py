"""Adversarial AUC optimization on long-tail binary data."""

__version__ = "0.1.0"
