"""Adaptive context-aware monitoring of activities of daily living."""

__version__ = "0.1.0"
