"""Numerical toolkit for twisted (Moyal) tensor products and wedge-local free fields."""

__version__ = "0.1.0"
