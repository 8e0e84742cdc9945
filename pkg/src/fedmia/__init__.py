"""Federated HAR simulator with a curious-server membership/source inference attack."""

__version__ = "0.1.0"
