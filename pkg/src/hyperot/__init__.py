"""Semi-discrete optimal transport on the hyperbolic plane and on closed hyperbolic surfaces."""

__version__ = "0.1.0"
