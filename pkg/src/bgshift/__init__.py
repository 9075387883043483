"""Background-shift data generation, consistency losses and robustness benchmarks."""

__version__ = "0.1.0"
