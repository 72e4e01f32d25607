"""Diffusion learning over two competing networks of agents."""

__version__ = "0.1.0"
