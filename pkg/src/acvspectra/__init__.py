"""Limiting spectral distributions of sample autocovariance matrices of linear processes."""

__version__ = "0.1.0"
