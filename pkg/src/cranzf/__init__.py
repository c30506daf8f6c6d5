"""C-RAN joint zero-forcing simulator and analytic rate-loss bounds."""
__version__ = "0.1.0"
