"""Load disaggregation - regional demand allocation to substations."""

__version__ = "0.1.0"
