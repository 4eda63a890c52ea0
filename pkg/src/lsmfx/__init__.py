"""Bit-faithful emulation of a multiplier-less spiking reservoir and the
speech-recognition pipeline around it."""

__version__ = "0.1.0"
