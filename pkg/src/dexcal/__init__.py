"""Discrete exterior calculus on graphs and periodic hypercubic lattices."""

__version__ = "0.1.0"
