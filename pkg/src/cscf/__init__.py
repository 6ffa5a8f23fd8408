"""Consequence-aware sequential counterfactual search."""

__version__ = "0.1.0"
