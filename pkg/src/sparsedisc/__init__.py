"""Input-sparsity discrepancy minimization with exact reference paths."""

__version__ = "0.1.0"
