"""Young convolution integrals and mild solutions of SPDEs with linear Young drift."""

__version__ = "0.1.0"
