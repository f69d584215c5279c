"""Zero-inflated Gaussian-copula density models and anomaly-scoring tools."""

__version__ = "0.1.0"
