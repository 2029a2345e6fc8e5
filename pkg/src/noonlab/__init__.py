"""Exact Fock-space simulation of detection-conditioned NOON-state protocols."""

__version__ = "0.1.0"
