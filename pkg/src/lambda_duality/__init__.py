"""Numerical lambda-duality calculus for deformed exponential families."""

__version__ = "0.1.0"
