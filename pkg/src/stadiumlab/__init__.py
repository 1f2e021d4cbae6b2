"""Numerical laboratory for overdetermined infinity-Laplacian problems on convex planar domains."""

__version__ = "0.1.0"
