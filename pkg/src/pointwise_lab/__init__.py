"""Pointwise vs uniform convergence experiments for adversarial examples."""

__version__ = "0.1.0"
