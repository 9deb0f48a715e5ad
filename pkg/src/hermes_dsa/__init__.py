"""Decentralised spectrum access with shuffled deep-Q agents."""

__version__ = "0.1.0"
