"""Numerical toolkit for kinetic limits of random Schrodinger dynamics."""

__version__ = "0.1.0"
