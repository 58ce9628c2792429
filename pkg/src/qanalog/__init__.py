"""Classical simulation of quantum analog encodings of stochastic processes."""
__version__ = "0.1.0"
