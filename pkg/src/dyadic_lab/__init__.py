"""Dyadic Haar and Wilson systems, weighted paraproducts and A2 norm experiments on truncated grids."""
from .grid import (CellIndex, DyadicError, GridMismatchError, GridSpec, ResolutionError, StepFunction,
                   average, inner, inner_w, norm, norm_w)
from .weight import PositivityError, Weight, a2_characteristic, gen_power_weight, gen_recursive_weight

__version__ = "0.1.0"

__all__ = [
    "CellIndex", "DyadicError", "GridMismatchError", "GridSpec", "ResolutionError", "StepFunction",
    "average", "inner", "inner_w", "norm", "norm_w", "PositivityError", "Weight", "a2_characteristic",
    "gen_power_weight", "gen_recursive_weight",
]
