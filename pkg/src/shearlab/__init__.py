"""Numerical laboratory for inviscid damping and enhanced dissipation around mixing layers."""

__version__ = "0.1.0"
