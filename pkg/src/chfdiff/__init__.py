"""Diffusion-model generation of critical heat flux data, with physics checks."""

__version__ = "0.1.0"
