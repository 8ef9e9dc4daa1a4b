"""Stair-matrix iterative detection for massive MIMO uplink."""

__version__ = "0.1.0"
