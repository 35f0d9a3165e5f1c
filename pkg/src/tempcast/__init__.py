"""Monthly, seasonal, and annual mean temperature forecasting toolkit."""

__version__ = "0.1.0"
