"""Adaptive robust portfolio control under copula uncertainty."""

from ._nparc import (
    CapacityError,
    ConditioningError,
    DataError,
    Error,
    GpSurrogate,
    IncompleteArtifacts,
    InvalidConfig,
    InvalidInput,
    NonConvergenceAbort,
    RunConfig,
    SolveArtifacts,
    bernstein,
    empirical_copula,
    generate_data,
    load_solution,
    loss,
    marginal_mismatch,
    normal_cdf,
    radius,
    simulate,
    solve,
    true_copula_sample,
    wasserstein,
    wealth_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
