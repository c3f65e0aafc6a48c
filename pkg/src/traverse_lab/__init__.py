"""Trace-based checking of optimistic traversals in concurrent search structures."""
__version__ = "0.1.0"
