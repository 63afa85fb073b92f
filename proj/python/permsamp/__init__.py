"""Exact sampling of matrix-weighted permutations and permanent estimation.

The heavy lifting lives in the C++ extension module; this package re-exports
its public surface.
"""

from permsamp._core import (
    DimensionTooLargeError,
    InputError,
    RejectionCapExceededError,
    ZeroPermanentError,
    __version__,
    bound_improvement_ratio,
    clopper_pearson,
    estimate_fixed_bound,
    estimate_tightening,
    generate_block_diagonal,
    generate_uniform,
    log_upper_bound,
    permanent_block_diagonal,
    permanent_brute_force,
    permanent_ryser,
    read_matrix_market,
    sample_permutations,
    track_demo,
    write_matrix_market,
)

__all__ = [
    "DimensionTooLargeError",
    "InputError",
    "RejectionCapExceededError",
    "ZeroPermanentError",
    "__version__",
    "bound_improvement_ratio",
    "clopper_pearson",
    "estimate_fixed_bound",
    "estimate_tightening",
    "generate_block_diagonal",
    "generate_uniform",
    "log_upper_bound",
    "permanent_block_diagonal",
    "permanent_brute_force",
    "permanent_ryser",
    "read_matrix_market",
    "sample_permutations",
    "track_demo",
    "write_matrix_market",
]
