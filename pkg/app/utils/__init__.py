"""Logging, errors, units and artifact writers."""
