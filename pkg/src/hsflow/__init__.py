"""Explicit and conservative weak solutions of the periodic two-component Hunter-Saxton system."""

__version__ = "0.1.0"
