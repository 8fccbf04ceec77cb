"""Fairness auditing for binary decision datasets."""

__version__ = "0.1.0"
