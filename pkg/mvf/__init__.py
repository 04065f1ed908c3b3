"""Homogeneous groups, Kolmogorov kernels and numerical mean value formulas."""

__version__ = "0.3.0"
