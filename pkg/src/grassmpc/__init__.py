"""Reduced-order linear MPC with data-driven subspace design."""

__version__ = "0.1.0"
