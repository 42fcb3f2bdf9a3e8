"""
The sprinter pipeline: fit main effects, screen interactions against that fit
and refit main effects plus the selected interactions around it.

    1. cross-validated lasso of y on X
    2. one dimensional fit of every interaction with the step 1 fit as offset
    3. keep the top-m (or |gamma| > eta) interactions
    4. cross-validated lasso of y on [X | Z_selected] with the step 1 fit as
       offset

The final model adds the step 4 main effects to the step 1 ones.
"""

from dataclasses import dataclass, field
import typing as t

import numpy as np
from numpy import typing as npt

from sprinter import context, design, errors, logging, penalized
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import SprinterConfig
from sprinter.design import PairIndex, Standardization
from sprinter.families import Family, get_family

__all__ = (
    "InteractionModel",
    "SprinterModel",
    "sprinter_fit",
    "sprinter_predict",
    "combine",
)


FloatArray = npt.NDArray[np.float64]

logger = logging.get_logger(__name__)


@dataclass(frozen=True, kw_only=True)
class InteractionModel:
    """
    theta(x) = intercept + x' main_coefs + sum_j delta_j z_j(x) where every
    z_j is the product of two columns standardized with `std`.
    """

    family: Family
    intercept: float
    # dense, original scale, length p
    main_coefs: FloatArray
    # (pair, delta), nonzero deltas only
    interactions: t.Tuple[t.Tuple[PairIndex, float], ...] = ()
    std: Standardization | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return int(self.main_coefs.shape[0])

    def linear_predictor(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        X = np.asarray(X, dtype=np.float64)

        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise errors.DimensionError(
                f"model has {self.n_features} main effects, X has shape "
                f"{X.shape}"
            )

        theta = self.intercept + X @ self.main_coefs

        if self.interactions:
            std = self.std or Standardization.identity(self.n_features)
            pairs = [pair for pair, _ in self.interactions]
            delta = np.array([value for _, value in self.interactions])
            theta = theta + design.selected_columns(X, std, pairs) @ delta

        if offset is not None:
            theta = theta + np.asarray(offset, dtype=np.float64)

        return theta

    def predict(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        return self.family.mean(self.linear_predictor(X, offset))


def combine(
    refit: penalized.GlmFit,
    pairs: t.Sequence[PairIndex],
    std: Standardization,
    base: penalized.GlmFit | None = None,
) -> InteractionModel:
    """
    Turn a fit over [X | Z_pairs] into a model. When the fit used `base` as
    offset, the base fit is folded in.
    """
    p = refit.n_features - len(pairs)
    dense = refit.dense()
    intercept = refit.intercept
    main = dense[:p].copy()

    if base is not None:
        intercept += base.intercept
        main += base.dense()

    return InteractionModel(
        family=refit.family,
        intercept=intercept,
        main_coefs=main,
        interactions=tuple(
            (pair, float(dense[p + i]))
            for i, pair in enumerate(pairs)
            if dense[p + i] != 0.0
        ),
        std=std,
    )


@dataclass(frozen=True, kw_only=True)
class SprinterModel:
    family: Family
    model: InteractionModel
    step1: penalized.GlmFit
    screen: screening.ScreenResult
    step4: penalized.GlmFit
    lambda1: float
    lambda4: float
    # no interaction survived screening, the model is a main-effects refit
    degenerate: bool
    cfg: SprinterConfig = field(repr=False)

    @property
    def intercept(self) -> float:
        return self.model.intercept

    @property
    def main_coefs(self) -> FloatArray:
        return self.model.main_coefs

    @property
    def interactions(self) -> t.Tuple[t.Tuple[PairIndex, float], ...]:
        return self.model.interactions

    def linear_predictor(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.linear_predictor(X)

    def predict(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.predict(X)


def _widen(
    X: FloatArray,
    std: Standardization,
    pairs: t.Sequence[PairIndex],
) -> FloatArray:
    if not pairs:
        return X

    return np.asfortranarray(
        np.hstack([X, design.selected_columns(X, std, pairs)])
    )


def _check(
    family: Family,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
) -> t.Tuple[FloatArray, FloatArray]:
    X = design.check_matrix(X)
    y = family.validate_response(y)

    if y.shape != (X.shape[0],):
        raise errors.DimensionError(
            f"X has {X.shape[0]} rows, y has shape {y.shape}"
        )

    n, p = X.shape

    if n < 10 or p < 2:
        raise errors.UsageError(f"need n >= 10 and p >= 2, got n={n} p={p}")

    return X, y


class _Candidate(t.NamedTuple):
    fit1: penalized.GlmFit
    offset: FloatArray
    screen: screening.ScreenResult
    # [X | Z_selected] on the full data
    W: FloatArray
    grid4: FloatArray


def _joint_candidates(n_lambda: int, size: int) -> npt.NDArray[np.int64]:
    idx = np.linspace(0, n_lambda - 1, max(1, min(size, n_lambda)))

    return np.unique(np.round(idx).astype(np.int64))


def _joint(
    family: Family,
    X: FloatArray,
    y: FloatArray,
    step1: penalized.CvResult,
    cfg: SprinterConfig,
    ctx: context.Context,
) -> t.Tuple[int, int, t.List[_Candidate]]:
    """
    Cross-validate (lambda_1, lambda_4) pairs. Every fold reruns steps 1 to 4
    on its training rows; lambda_4 grids come from the full data.

    Returns the winning candidate, the winning lambda_4 index and the full
    data state for every candidate.
    """
    solver = cfg.solver
    candidates = _joint_candidates(len(step1.lambda_grid), cfg.joint_grid)
    Xs, std = design.standardize(X)
    inner = ctx.bind(workers=1)

    # full-data screen and lambda_4 grid for every lambda_1 candidate
    full: t.List[_Candidate] = []

    for c in candidates:
        fit1 = step1.path[c]
        offset = fit1.linear_predictor(X)
        res = screening.screen(family, Xs, y, offset, cfg=cfg.screen, ctx=ctx)
        W = _widen(X, std, res.pairs)
        grid4 = penalized.lambda_grid(family, W, y, offset, cfg=solver)
        full.append(_Candidate(fit1, offset, res, W, grid4))

    folds = step1.fold_assignment

    def run(k: int) -> FloatArray | None:
        train = folds != k
        test = ~train

        if family.kind == "binomial" and np.unique(y[train]).size < 2:
            logger.warning("cv.fold_skipped", fold=k, reason="single class")

            return None

        X_tr, y_tr = X[train], y[train]
        X_te, y_te = X[test], y[test]
        path1 = penalized.fit_path(
            family, X_tr, y_tr, lambda_grid=step1.lambda_grid, cfg=solver
        )
        Xs_tr, std_tr = design.standardize(X_tr)
        dev = np.full((len(candidates), solver.n_lambda), np.nan)

        for ci, c in enumerate(candidates):
            fit1 = path1[c]
            off_tr = fit1.linear_predictor(X_tr)
            off_te = fit1.linear_predictor(X_te)
            res = screening.screen(
                family, Xs_tr, y_tr, off_tr, cfg=cfg.screen, ctx=inner
            )
            grid4 = full[ci].grid4
            path4 = penalized.fit_path(
                family,
                _widen(X_tr, std_tr, res.pairs),
                y_tr,
                off_tr,
                lambda_grid=grid4,
                cfg=solver,
            )
            W_te = _widen(X_te, std_tr, res.pairs)

            for li, fit4 in enumerate(path4):
                mu, _ = penalized.predict(fit4, W_te, off_te)
                dev[ci, li] = family.deviance(mu, y_te) / y_te.shape[0]

        return dev

    results = ctx.map(run, list(range(int(folds.max()) + 1)))
    used = [r for r in results if r is not None]

    if not used:
        raise errors.InputError("every cross-validation fold is degenerate")

    cv = np.nanmean(np.stack(used), axis=0)
    ci, li = np.unravel_index(int(np.nanargmin(cv)), cv.shape)

    logger.debug(
        "pipeline.joint_tuned",
        lambda1=float(step1.lambda_grid[candidates[ci]]),
        lambda4=float(full[ci].grid4[li]),
        deviance=float(cv[ci, li]),
    )

    return int(ci), int(li), full


def sprinter_fit(
    family: "Family | str",
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: SprinterConfig | None = None,
    ctx: context.Context | None = None,
) -> SprinterModel:
    """
    Fit a sparse main-effects plus interactions GLM.

    `cfg.tuning` chooses between sequential tuning (lambda_1 by CV first, then
    lambda_4 by CV with lambda_1 fixed) and joint tuning over pairs.
    Deterministic given `cfg.seed`.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or SprinterConfig()
    family = get_family(family)
    X, y = _check(family, X, y)
    solver = cfg.solver

    log = logger.bind(family=family.kind, tuning=cfg.tuning)
    log.info("pipeline.start", n=X.shape[0], p=X.shape[1])

    step1 = penalized.cv_fit(
        family,
        X,
        y,
        n_folds=cfg.cv_folds,
        seed=cfg.seed,
        cfg=solver,
        ctx=ctx,
    )
    _, std = design.standardize(X)

    match cfg.tuning:
        case "sequential":
            fit1 = step1.best
            offset = fit1.linear_predictor(X)
            res = screening.screen(
                family,
                std.apply(X),
                y,
                offset,
                cfg=cfg.screen,
                ctx=ctx,
            )
            step4 = penalized.cv_fit(
                family,
                _widen(X, std, res.pairs),
                y,
                offset,
                n_folds=cfg.cv_folds,
                seed=cfg.seed,
                cfg=solver,
                ctx=ctx,
            )
            fit4 = step4.best
        case "joint":
            ci, li, full = _joint(family, X, y, step1, cfg, ctx)
            fit1, offset, res, W, grid4 = full[ci]
            fit4 = penalized.fit_path(
                family, W, y, offset, lambda_grid=grid4[: li + 1], cfg=solver
            )[-1]
        case _:
            raise errors.UsageError(f"unknown tuning: {cfg.tuning!r}")

    degenerate = len(res) == 0

    if degenerate:
        log.warning("pipeline.empty_selection", mode=res.mode, eta=res.eta)

    model = combine(fit4, res.pairs, std, base=fit1)

    log.info(
        "pipeline.done",
        selected=len(res),
        interactions=len(model.interactions),
        lambda1=fit1.lambda_,
        lambda4=fit4.lambda_,
    )

    return SprinterModel(
        family=family,
        model=model,
        step1=fit1,
        screen=res,
        step4=fit4,
        lambda1=fit1.lambda_,
        lambda4=fit4.lambda_,
        degenerate=degenerate,
        cfg=cfg,
    )


def sprinter_predict(
    model: "SprinterModel | InteractionModel",
    X: npt.ArrayLike,
) -> FloatArray:
    """
    Fitted means b'(theta) for new rows, building only the selected
    interaction columns.
    """
    return model.predict(X)

