"""Radial solutions of Δ²u = -u^{-q} in three dimensions."""

__version__ = "0.1.0"
