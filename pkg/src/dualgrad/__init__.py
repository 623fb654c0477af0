"""Dual gradient regularization for inverse problems with repeated measurements."""

from .experiments import ExperimentSpec, build_problem, builtin_spec, run_experiment
from .operators import Grid1D, LinearMap, ProductMap, estimate_norm
from .penalties import DualPenalty, parse_penalty
from .sampling import MeasurementEnsemble, NoiseModel, generate_ensemble
from .solver import APriori, Discrepancy, SolverConfig, SolverRun, landweber, run

__version__ = "0.1.0"
