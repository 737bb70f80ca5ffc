"""Kernel selection: compiled extension when built, numpy fallback otherwise.

Set SPECTRUM_CRITERIA_PURE=1 to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
shoot_radial = _kernels_py.shoot_radial
simplex_energy_grad = _kernels_py.simplex_energy_grad

if os.environ.get("SPECTRUM_CRITERIA_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        shoot_radial = _kernels.shoot_radial
        simplex_energy_grad = _kernels.simplex_energy_grad

__all__ = ["BACKEND", "shoot_radial", "simplex_energy_grad"]
