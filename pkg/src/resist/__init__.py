"""Minimal-resistance bodies: convex geometry, surface measures, nose stretching."""

__version__ = "0.1.0"
