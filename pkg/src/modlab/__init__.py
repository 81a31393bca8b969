"""Monte Carlo verification of limit laws for randomly modulated high-dimensional data."""
from ._accel import backend

__version__ = "0.1.0"

__all__ = ["__version__", "backend"]
