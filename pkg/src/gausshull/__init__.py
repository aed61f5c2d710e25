"""Convex hulls of stationary Gaussian fields and their limit shape."""

__version__ = "0.1.0"
