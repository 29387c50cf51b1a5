"""Entropy functionals and heat flow on weighted one-dimensional model spaces."""

__version__ = "0.1.0"
