"""Vine copula estimation, sampling and vine-copula autoencoders."""

__version__ = "0.1.0"
