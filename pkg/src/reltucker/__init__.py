"""Relational Tucker3 decomposition for multi-relational link prediction."""

__version__ = "0.1.0"
