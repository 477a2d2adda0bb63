"""Casimir energy between a perfectly conducting plane and a magnetodielectric sphere."""
__version__ = "0.1.0"
