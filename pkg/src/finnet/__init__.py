"""Filtered dependency networks from panels of asset prices."""

__version__ = "0.1.0"
