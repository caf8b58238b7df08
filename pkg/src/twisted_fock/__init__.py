"""Numerical toolkit for twisted Fock spaces, the Weyl transform and Weyl multipliers."""

__version__ = "0.1.0"
