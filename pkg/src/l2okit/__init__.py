"""Training techniques for coordinate-wise LSTM learned optimizers."""

__version__ = "0.1.0"
