"""Multilevel source PAC coding for key generation from correlated Gaussian observations."""

__version__ = "0.1.0"
