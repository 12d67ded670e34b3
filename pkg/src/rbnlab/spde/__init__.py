"""Mollified stochastic heat equation: coefficients, solver and checks."""
from .coefficients import (AdditiveNoise, ConstantProfile, DiffusionCoefficient, FunctionProfile,
                           MollifiedDiffusion, SingularProfile, SmoothProfile, TableProfile,
                           hs_norm_sq, mollify, sigma_difference_lp)
from .solver import (CylindricalIncrements, EnsembleResult, EnsembleSpec, SpdeTrajectory,
                     run_ensemble, solve_mollified)

__all__ = [
    "AdditiveNoise", "ConstantProfile", "CylindricalIncrements", "DiffusionCoefficient",
    "EnsembleResult", "EnsembleSpec", "FunctionProfile", "MollifiedDiffusion", "SingularProfile",
    "SmoothProfile", "SpdeTrajectory", "TableProfile", "hs_norm_sq", "mollify", "run_ensemble",
    "sigma_difference_lp", "solve_mollified",
]
