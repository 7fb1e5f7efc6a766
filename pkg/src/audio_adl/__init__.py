"""Recognize home activities from audio embeddings with a small 1-D CNN."""

__version__ = "0.1.0"
