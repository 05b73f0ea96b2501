"""Homogenization of Hamilton-Jacobi equations across an oscillating two-scale interface."""

__version__ = "0.1.0"
