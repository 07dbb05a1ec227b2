"""Spectral flow of the fibered shallow-water operator with a Coriolis profile f(y)."""

__version__ = "0.1.0"
