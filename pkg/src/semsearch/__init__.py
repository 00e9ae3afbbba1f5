"""semsearch: 2D semantic target-search simulation and planning toolkit."""

__version__ = "0.1.0"
