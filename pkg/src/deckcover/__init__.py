"""Coverings from Cech cocycles, multi-valued potentials, lifted actions and local moment maps."""

__version__ = "0.1.0"
