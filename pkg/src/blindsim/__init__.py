"""Simulation and verification toolkit for blind delegated quantum computation."""

__version__ = "0.1.0"
