"""Controllable Gaussian splatting toolkit: software rasterizer with a
splat-flow channel, instantaneous flow decomposition, density-based
dynamic-object discovery, and spherical-vector scene control."""

__version__ = "0.1.0"
