"""District-level hourly traffic congestion forecasting."""

__version__ = "0.1.0"
