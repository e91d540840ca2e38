"""Braided-stent deployment simulation and POD+GPR surrogate toolkit."""

__version__ = "0.1.0"
