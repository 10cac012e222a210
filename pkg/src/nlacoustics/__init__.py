"""Nonlinear damped wave equations of thermoviscous acoustics."""

__version__ = "0.1.0"
