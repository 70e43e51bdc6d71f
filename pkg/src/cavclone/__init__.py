"""Cavity-QED 1->2 universal quantum cloning simulator."""

__version__ = "0.1.0"
