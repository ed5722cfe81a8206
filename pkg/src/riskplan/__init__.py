"""Risk-aware exploration planning engine and deterministic 2.5D simulator."""

__version__ = "0.1.0"
