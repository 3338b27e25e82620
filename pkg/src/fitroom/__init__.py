"""Fitting-room queueing model in two paradigms (DES and ABS) with validation tooling."""

__version__ = "0.1.0"
