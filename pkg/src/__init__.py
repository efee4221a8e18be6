"""logsp: planar Schrodinger-Poisson variational toolkit."""

__version__ = "0.1.0"
