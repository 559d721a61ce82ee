"""Income fluctuation problem with state-dependent discounting, stochastic
returns and stochastic income.

Submodules: :mod:`ifp.markov` (chains, spectral radii, growth rates),
:mod:`ifp.model` (primitives and the condition report), :mod:`ifp.solver`
(time iteration), :mod:`ifp.dynamics` (wealth simulation),
:mod:`ifp.tail` (Pareto tail exponent) and :mod:`ifp.cli`.
"""

from ._accel import backend_name
from .markov import growth_rate, mc_growth_oracle, rouwenhorst, spectral_radius, stationary_distribution
from .model import ModelSpec, compute_growth_report, constant, discrete, lognormal
from .solver import AssetGrid, Policy, SolverConfig, solve
from .dynamics import SimConfig, simulate
from .tail import hill_estimator, kappa, lambda_of_s, tail_report

__version__ = "0.1.0"

__all__ = [
    "AssetGrid", "ModelSpec", "Policy", "SimConfig", "SolverConfig", "backend_name", "compute_growth_report",
    "constant", "discrete", "growth_rate", "hill_estimator", "kappa", "lambda_of_s", "lognormal",
    "mc_growth_oracle", "rouwenhorst", "simulate", "solve", "spectral_radius", "stationary_distribution",
    "tail_report",
]
