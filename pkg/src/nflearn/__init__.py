"""Finite-horizon laboratory for learning infinite binary sequences."""

__version__ = "0.1.0"
