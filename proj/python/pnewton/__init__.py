"""Penalty and augmented Newton solvers for regularized generalized linear models."""

from ._core import (
    Error,
    GlmProblem,
    InvalidArgument,
    RootResult,
    anm_step,
    certify,
    compute_beta,
    compute_K,
    compute_Lmat,
    compute_xi,
    load_dataset,
    newton_step,
    optimum,
    pnm_step,
    root_augmented_newton,
    root_penalty_newton,
    run_experiment,
    solve,
    verify_inverse_identities,
)

__all__ = [
    "Error",
    "GlmProblem",
    "InvalidArgument",
    "RootResult",
    "anm_step",
    "certify",
    "compute_beta",
    "compute_K",
    "compute_Lmat",
    "compute_xi",
    "load_dataset",
    "newton_step",
    "optimum",
    "pnm_step",
    "root_augmented_newton",
    "root_penalty_newton",
    "run_experiment",
    "solve",
    "verify_inverse_identities",
]
