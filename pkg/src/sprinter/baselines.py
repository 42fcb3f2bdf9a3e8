"""
Comparison methods: main-effects lasso (MEL), all-pairs lasso (APL) and
marginal interaction screening (SIS).
"""

from dataclasses import dataclass
import typing as t

import numpy as np
from numpy import typing as npt

from sprinter import context, design, errors, logging, penalized
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import ScreenConfig, SolverConfig
from sprinter.design import PairIndex, Pairs
from sprinter.families import Family, get_family
from sprinter.pipeline import InteractionModel, combine

__all__ = (
    "BaselineFit",
    "fit_mel",
    "fit_apl",
    "fit_sis",
)


FloatArray = npt.NDArray[np.float64]

logger = logging.get_logger(__name__)


@dataclass(frozen=True, kw_only=True)
class BaselineFit:
    method: str
    # the penalized fit over the widened design
    fit: penalized.GlmFit
    model: InteractionModel
    screen: screening.ScreenResult | None = None

    @property
    def family(self) -> Family:
        return self.model.family

    @property
    def interactions(self) -> t.Tuple[t.Tuple[PairIndex, float], ...]:
        return self.model.interactions

    def linear_predictor(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.linear_predictor(X)

    def predict(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.predict(X)


def fit_mel(
    family: "Family | str",
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    cv_folds: int = 5,
    seed: int = 0,
    cfg: SolverConfig | None = None,
    ctx: context.Context | None = None,
) -> penalized.GlmFit:
    """
    Cross-validated lasso on the main effects alone.
    """
    result = penalized.cv_fit(
        get_family(family),
        X,
        y,
        n_folds=cv_folds,
        seed=seed,
        cfg=cfg,
        ctx=ctx,
    )

    return result.best


def fit_apl(
    family: "Family | str",
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    cv_folds: int = 5,
    seed: int = 0,
    p_cap: int = 600,
    squares: bool = True,
    cfg: SolverConfig | None = None,
    ctx: context.Context | None = None,
) -> BaselineFit:
    """
    Cross-validated lasso over the main effects and every pairwise
    interaction. The full n x (p + q) design is held in memory, so designs
    wider than `p_cap` are refused.
    """
    family = get_family(family)
    X = design.check_matrix(X)
    n, p = X.shape

    if p > p_cap:
        raise errors.CapacityError(
            f"all-pairs lasso refuses p={p} > p_cap={p_cap}; "
            "use sprinter for designs this wide"
        )

    Xs, std = design.standardize(X)
    pairs = Pairs(p, squares=squares)

    W = np.empty((n, p + pairs.q), order="F")
    W[:, :p] = X

    width = max(1, 262144 // max(n, 1))

    for start in range(0, pairs.q, width):
        stop = min(start + width, pairs.q)
        a, b = pairs.arrays(start, stop)
        design.interaction_columns(
            Xs, a, b, out=W[:, p + start : p + stop]
        )

    logger.debug("apl.design", n=n, columns=W.shape[1])

    result = penalized.cv_fit(
        family,
        W,
        y,
        n_folds=cv_folds,
        seed=seed,
        cfg=cfg,
        ctx=ctx,
    )

    a, b = pairs.all
    index = [
        PairIndex(flat=j, a=int(a[j]), b=int(b[j])) for j in range(pairs.q)
    ]

    return BaselineFit(
        method="apl",
        fit=result.best,
        model=combine(result.best, index, std),
    )


def fit_sis(
    family: "Family | str",
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    m: int | None = None,
    cv_folds: int = 5,
    seed: int = 0,
    cfg: SolverConfig | None = None,
    screen_cfg: ScreenConfig | None = None,
    ctx: context.Context | None = None,
) -> BaselineFit:
    """
    Rank interactions by a marginal fit, intercept plus one interaction and
    no main-effects offset, keep the top-m and run a cross-validated lasso
    on [X | Z_selected].
    """
    family = get_family(family)
    X = design.check_matrix(X)
    Xs, std = design.standardize(X)

    res = screening.screen(
        family,
        Xs,
        y,
        m=m,
        cfg=screen_cfg,
        ctx=ctx,
        intercept=True,
    )

    W = X

    if len(res):
        W = np.asfortranarray(
            np.hstack([X, design.selected_columns(X, std, res.pairs)])
        )

    result = penalized.cv_fit(
        family,
        W,
        y,
        n_folds=cv_folds,
        seed=seed,
        cfg=cfg,
        ctx=ctx,
    )

    return BaselineFit(
        method="sis",
        fit=result.best,
        model=combine(result.best, res.pairs, std),
        screen=res,
    )
