"""Numerical laboratory for Fisher-KPP fronts and bumps in localized media."""

__version__ = "0.1.0"
