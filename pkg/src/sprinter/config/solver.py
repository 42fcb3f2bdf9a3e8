"""
Contains the configuration for the penalized GLM solver.
"""

import msgspec

__all__ = ("SolverConfig",)


class SolverConfig(msgspec.Struct, frozen=True, kw_only=True):
    """
    Holds the numerical settings for coordinate descent over IRLS.
    """

    # elastic-net mixing, 1 is the lasso, 0 is ridge
    alpha: float = 1.0
    # number of points on the log-spaced lambda grid
    n_lambda: int = 100
    # smallest lambda as a fraction of lambda_max, None picks 1e-4 when n > p
    # and 1e-2 otherwise
    lambda_min_ratio: float | None = None
    # coordinate sweeps allowed per lambda before giving up
    max_iter: int = 1000
    # convergence threshold on the largest coefficient change (standardized
    # scale)
    tol: float = 1e-7
    # outer IRLS iterations allowed per lambda
    irls_max_iter: int = 100
    # lower bound on IRLS weights
    weight_floor: float = 1e-5
    # fit on standardized columns and report on the original scale
    standardize: bool = True
