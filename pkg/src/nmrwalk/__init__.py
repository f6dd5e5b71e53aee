"""Discrete-time quantum walk on a square: ideal, NMR pulse-level and decohered simulations."""

__version__ = "0.1.0"
