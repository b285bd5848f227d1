"""Connectivity-preserving loss for thin line-shaped segmentation targets."""

__version__ = "0.1.0"
