"""Qualification retrieval over heterogeneous component databases."""

__version__ = "0.1.0"
