"""Gradient methods with alignment for SPD linear systems."""

from .krylov import KrylovConfig, run_cg, run_gmres
from .linalg import SparseMatrix, SpectralModel, quad_forms, read_matrix_market, spmv, write_matrix_market
from .problems import Problem, gen_bvp, gen_diagonal, gen_perturbed, gen_random_spd, unit_scaled
from .solver import IterationTrace, SolveConfig, run_gradient
from .steps import StepRule, StepState, schedule_next

__version__ = "0.1.0"

__all__ = [
    "KrylovConfig", "run_cg", "run_gmres", "SparseMatrix", "SpectralModel", "quad_forms",
    "read_matrix_market", "spmv", "write_matrix_market", "Problem", "gen_bvp", "gen_diagonal",
    "gen_perturbed", "gen_random_spd", "unit_scaled", "IterationTrace", "SolveConfig",
    "run_gradient", "StepRule", "StepState", "schedule_next",
]
