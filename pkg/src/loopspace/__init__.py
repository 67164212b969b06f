"""Desk-scale numerics for loop spaces of finite-dimensional manifolds."""

__version__ = "0.1.0"
