"""Algebraic multigrid with grammar-generated flexible cycles."""

__version__ = "0.1.0"
