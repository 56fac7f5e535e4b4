"""Bose-Hubbard chain simulator: TEBD with number conservation and exact-diagonalization checks."""

__version__ = "0.1.0"
