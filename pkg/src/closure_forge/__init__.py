"""Gomory mixed-integer cuts from learned aggregation multipliers."""

__version__ = "0.1.0"
