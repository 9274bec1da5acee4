"""Harmonic analysis on the hypercube and the sphere, and Monte Carlo checks
of sensitivity bounds for randomly rotated polynomial threshold functions."""

__version__ = "0.1.0"
