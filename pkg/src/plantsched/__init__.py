"""Planting-time scheduling for year-round seed breeding under GDU uncertainty."""

__version__ = "0.1.0"
