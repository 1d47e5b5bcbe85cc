"""Batched codes on line networks: exact composition, capacity and converse bounds."""

__version__ = "0.1.0"
