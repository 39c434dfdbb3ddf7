"""Smallest and largest argmax functionals on Skorohod-space jump processes."""

__version__ = "0.1.0"
