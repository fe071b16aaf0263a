"""Differentially private synthetic runtime traces for performance modeling."""

__version__ = "0.1.0"
