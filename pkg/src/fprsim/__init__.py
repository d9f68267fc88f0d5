"""Fractional pilot reuse (FPR) for multi-cell massive MIMO uplink."""

__version__ = "0.1.0"
