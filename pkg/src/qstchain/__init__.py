"""Design and analysis of Heisenberg spin chains for quantum state transfer."""

__version__ = "0.1.0"
