"""Numerical experiments for central limit theorems of inhomogeneous
Diophantine approximation counts with weights."""

__version__ = "0.1.0"
