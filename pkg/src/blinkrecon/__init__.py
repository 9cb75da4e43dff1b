"""Blink gap reconstruction for horizontal reading eye traces."""

__version__ = "0.1.0"
