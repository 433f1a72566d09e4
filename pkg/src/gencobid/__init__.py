"""Day-ahead offering strategy toolkit for a large power producer."""

__version__ = "0.1.0"
