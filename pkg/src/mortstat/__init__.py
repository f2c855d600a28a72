"""Survival analysis and mortality-reporting statistics."""

__version__ = "0.1.0"
