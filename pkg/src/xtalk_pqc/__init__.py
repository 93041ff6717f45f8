"""Crosstalk-aware hardware-efficient ansatz toolkit."""

__version__ = "0.1.0"
