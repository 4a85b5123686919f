"""Numerical laboratory for bulk-viscous relativistic fluids near a physical vacuum edge."""

__version__ = "0.1.0"
