"""Variational MTRNN interaction sandbox with hybrid compliance control."""

__version__ = "0.1.0"
