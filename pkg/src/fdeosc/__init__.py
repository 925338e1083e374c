"""Oscillation and global solvability checks for second-order linear
functional-differential equations with deviating arguments."""

__version__ = "0.1.0"
