"""Emission-aware scheduling of distributed grid storage."""

__version__ = "0.1.0"
