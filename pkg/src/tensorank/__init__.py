"""Sparse low-rank CP approximation of third-order tensors with automatic rank estimation."""
from .cp import CpFactors, count_nonzero, gradients, objective, q_matrix, reconstruct, update_matrices
from .experiments import gen_random_lowrank, relative_residual
from .params import LambdaEstimate, consistency_bound, estimate_lambda
from .solver import (
    LassoProblem,
    SolveResult,
    SolverConfig,
    kkt_residual,
    lasso_solve_ista,
    lrat_solve,
    lrat_step,
    modals_solve,
    soft_threshold,
)
from .tensor import devectorize, khatri_rao, kronecker, matricize, vectorize

__version__ = "0.1.0"
