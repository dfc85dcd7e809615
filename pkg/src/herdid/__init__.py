"""Self-supervised animal identity clustering for single-video detection embeddings."""

__version__ = "0.1.0"
