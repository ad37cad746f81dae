"""Deterministic simulator of physical clocks and time-transfer protocols."""

__version__ = "0.1.0"
