"""
Contains the configuration for the interaction screening pass.
"""

import msgspec

__all__ = ("ScreenConfig",)


class ScreenConfig(msgspec.Struct, frozen=True, kw_only=True):
    # keep the top-m interactions, None means floor(n / log n)
    m: int | None = None
    # keep every interaction with |gamma| > eta, takes precedence over m
    eta: float | None = None
    # include squared main effects as candidates
    squares: bool = True
    # |gamma| is confined to [-bound, bound]
    bound: float = 50.0
    # Newton iterations per candidate before flagging a failure
    max_iter: int = 100
    # required |score| / n at return
    tol: float = 1e-8
    # doubles materialized per block of interaction columns (n x columns)
    block_elements: int = 262144
