"""Convex billiards: support-function geometry, billiard maps, loop orbits,
integrability diagnostics and a discrete Aubry-Mather layer."""

__version__ = "0.1.0"
