"""Numerical criteria for semi-boundedness and discreteness of Schrodinger operator spectra."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
