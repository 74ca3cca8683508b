"""Reduced Einstein-Euler-entropy evolution in orthonormal-frame fluid gauge."""

__version__ = "0.1.0"
