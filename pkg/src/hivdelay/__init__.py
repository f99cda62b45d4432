"""Delayed HIV transmission model with education campaigns: simulation, equilibria, stability and fitting."""

from .dde import SolverConfig, Trajectory, integrate, simulate, simulate_si
from .equilibria import Equilibrium, RootCase, classify_roots, disease_free, solve_endemic
from .estimation import Dataset, FitProblem, FitResult, builtin_uganda, fit, load_dataset, sse
from .estimator import DelayHIVRegressor
from .params import ModelParams, derived, rhs_full, rhs_reduced, rhs_si
from .stability import char_function, dfe_stability, endemic_stable_u0, persistence_bounds

__all__ = [
    "Dataset", "DelayHIVRegressor", "Equilibrium", "FitProblem", "FitResult", "ModelParams",
    "RootCase", "SolverConfig", "Trajectory", "builtin_uganda", "char_function", "classify_roots",
    "derived", "dfe_stability", "disease_free", "endemic_stable_u0", "fit", "integrate",
    "load_dataset", "persistence_bounds", "rhs_full", "rhs_reduced", "rhs_si", "simulate",
    "simulate_si", "solve_endemic", "sse",
]
__version__ = "0.1.0"
