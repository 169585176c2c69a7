"""Simulation and verification toolkit for a hybrid qubit/cat-state entanglement witness."""

__version__ = "0.1.0"
