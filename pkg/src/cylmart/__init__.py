"""Stochastic numerics for cylindrical continuous local martingales on finite truncations."""

__version__ = "0.1.0"
