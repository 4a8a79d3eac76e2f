"""quantgym: market data curation, gym-style trading environments, and a
rolling train-test-trade pipeline with standardized performance metrics."""

__version__ = "0.1.0"
