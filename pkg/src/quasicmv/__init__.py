"""Quasi-periodic CMV matrices: cocycles, Green's functions, quantum walks, localization."""

__version__ = "0.1.0"
