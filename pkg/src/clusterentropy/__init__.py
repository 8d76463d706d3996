"""Cluster entropy of price series and its dependence on the investment horizon."""

__version__ = "0.1.0"
