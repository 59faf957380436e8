"""Desk-scale simulation of an ergodic quantum computer on a cylindrical crystal."""

__version__ = "0.1.0"
