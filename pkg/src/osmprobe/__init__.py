"""Optimized transmission conditions for two-subdomain Schwarz methods,
found by probing the subdomain Schur complements."""

__version__ = "0.1.0"
