"""Tracer-particle friction in an ideal Bose gas: kernels, dynamics and a field oracle."""

__version__ = "0.1.0"
