"""Gait identification from dense motion: tracklets, kinematic descriptors,
pyramidal Fisher Vector pooling and one-vs-all linear classification."""

__version__ = "0.1.0"
