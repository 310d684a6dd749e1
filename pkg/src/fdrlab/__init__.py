"""Functional de-rating estimation for gate-level circuits."""

__version__ = "0.1.0"
