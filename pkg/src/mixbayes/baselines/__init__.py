"""Sparsity-promoting reconstruction baselines."""
from .bases import GroupBases, SynthesisBasis, group_svd_bases, svd_basis
from .dictionary import (
    ConvergenceError,
    Dictionary,
    dict_learn,
    dl_reconstruct,
    group_dl_reconstruct,
    sparse_code,
)
from .prox import SparsitySet, project_sparse, prox_weighted_l2, soft_threshold
from .solvers import SolveResult, group_lasso, iht, ista_lasso, spectral_norm

__all__ = [
    "ConvergenceError",
    "Dictionary",
    "GroupBases",
    "SolveResult",
    "SparsitySet",
    "SynthesisBasis",
    "dict_learn",
    "dl_reconstruct",
    "group_dl_reconstruct",
    "group_lasso",
    "group_svd_bases",
    "iht",
    "ista_lasso",
    "project_sparse",
    "prox_weighted_l2",
    "soft_threshold",
    "sparse_code",
    "spectral_norm",
    "svd_basis",
]
