"""Contiguous grid-map embeddings of overlapping set systems."""

__version__ = "0.1.0"
