"""Gridded wildfire risk forecasting from sensor time series."""

__version__ = "0.1.0"
