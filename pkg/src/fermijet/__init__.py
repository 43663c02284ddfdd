"""Submanifold geodesic normal coordinates and their metric Taylor expansions."""

__version__ = "0.1.0"
