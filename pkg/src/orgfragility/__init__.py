"""Reliability of complex task networks and the investment game in corporate culture."""

__version__ = "0.1.0"
