"""Tractor calculus for CR structures and their Fefferman spaces."""

__version__ = "0.1.0"
