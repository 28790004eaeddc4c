"""Cluster-based initialization for cell-space architecture search."""

__version__ = "0.1.0"
