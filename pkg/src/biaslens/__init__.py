"""Demographic bias detection in news-consumption logs."""

__version__ = "0.1.0"
