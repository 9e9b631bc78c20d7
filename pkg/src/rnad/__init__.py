"""Regularized Nash dynamics: exact solvers, self-play learning, Stratego."""

__version__ = "0.1.0"
