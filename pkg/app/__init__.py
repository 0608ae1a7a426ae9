"""Numerical toolkit for weighted modulation spaces with ultradifferentiable weights."""

__version__ = "0.1.0"
