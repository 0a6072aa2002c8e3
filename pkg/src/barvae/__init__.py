"""Recurrent VAE for bar-structured symbolic music, numpy from end to end."""

__version__ = "0.1.0"
