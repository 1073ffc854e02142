"""Buckling-aware multiscale topology optimization on structured 2D meshes."""

__version__ = "0.1.0"
