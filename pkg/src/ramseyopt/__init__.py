"""Fisher-information-optimal Ramsey measurement scheduling toolkit."""

__version__ = "0.1.0"
