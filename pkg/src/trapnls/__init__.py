"""Spectral tools for the cubic NLS on R x R^d with a harmonic trap in the R^d directions."""

__version__ = "0.1.0"
