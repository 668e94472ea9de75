"""Bounds, exponents and rate splits for concatenated polar coding schemes."""

__version__ = "0.1.0"
