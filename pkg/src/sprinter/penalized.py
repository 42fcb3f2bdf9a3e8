"""
Elastic-net penalized GLMs with offsets, fitted along a lambda path by
coordinate descent over an IRLS quadratic approximation.

For every lambda the solver minimizes

    mean_i l(b0 + x_i' beta + offset_i, y_i)
        + lambda * sum_k pf_k (alpha |beta_k| + (1 - alpha) beta_k^2 / 2)

with the intercept b0 unpenalized. Columns are standardized internally and
coefficients are reported on the original scale. Paths are warm started and
each lambda starts from the sequential strong set; a KKT pass over all
columns re-admits any violator before a lambda is accepted.
"""

from dataclasses import dataclass, field
import math
import typing as t

import numpy as np
from numpy import typing as npt

from sprinter import context, design, errors, logging
from sprinter.config import SolverConfig
from sprinter.families import Family

__all__ = (
    "GlmFit",
    "CvResult",
    "fit_path",
    "cv_fit",
    "predict",
    "lambda_grid",
    "kkt_residual",
    "assign_folds",
    "check_offset",
)


FloatArray = npt.NDArray[np.float64]

logger = logging.get_logger(__name__)

# alpha below this is treated as this when sizing the grid (ridge has no
# finite lambda_max)
ALPHA_FLOOR = 1e-3


@dataclass(frozen=True, kw_only=True)
class GlmFit:
    family: Family
    intercept: float
    # nonzero coefficients only, original scale
    coefs: t.Mapping[int, float]
    n_features: int
    lambda_: float
    alpha: float
    offset_used: bool
    # coordinate sweeps spent on this lambda
    n_iter: int
    converged: bool
    # training deviance at this solution
    deviance: float = math.nan
    std: design.Standardization | None = field(default=None, repr=False)

    def coef(self, k: int) -> float:
        return self.coefs.get(k, 0.0)

    def dense(self) -> FloatArray:
        ret = np.zeros(self.n_features)

        for k, value in self.coefs.items():
            ret[k] = value

        return ret

    @property
    def support(self) -> t.Tuple[int, ...]:
        return tuple(sorted(self.coefs))

    def linear_predictor(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        X = np.asarray(X, dtype=np.float64)

        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise errors.DimensionError(
                f"fit has {self.n_features} columns, X has shape {X.shape}"
            )

        theta = np.full(X.shape[0], self.intercept)

        if self.coefs:
            idx = np.fromiter(self.coefs.keys(), dtype=np.int64)
            val = np.fromiter(self.coefs.values(), dtype=np.float64)
            theta = theta + X[:, idx] @ val

        if offset is not None:
            theta = theta + check_offset(offset, X.shape[0])

        return theta


@dataclass(frozen=True, kw_only=True)
class CvResult:
    # strictly decreasing
    lambda_grid: FloatArray
    # fold-averaged held-out deviance per observation
    cv_deviance: FloatArray
    cv_se: FloatArray
    lambda_min: float
    index_min: int
    # fold id of every training row
    fold_assignment: npt.NDArray[np.int64]
    # full-data fits along lambda_grid
    path: t.Sequence[GlmFit] = field(repr=False)
    n_folds_used: int = 0

    @property
    def best(self) -> GlmFit:
        return self.path[self.index_min]


def check_offset(offset: npt.ArrayLike | None, n: int) -> FloatArray:
    if offset is None:
        return np.zeros(n)

    offset = np.asarray(offset, dtype=np.float64)

    if offset.shape != (n,):
        raise errors.DimensionError(
            f"offset has shape {offset.shape}, expected ({n},)"
        )

    if not np.all(np.isfinite(offset)):
        raise errors.InputError("offset contains non-finite values")

    return offset


class _Problem:
    """
    Standardized data and penalty bookkeeping shared by every lambda.
    """

    def __init__(
        self,
        family: Family,
        X: npt.ArrayLike,
        y: npt.ArrayLike,
        offset: npt.ArrayLike | None,
        alpha: float,
        penalty_factors: npt.ArrayLike | None,
        cfg: SolverConfig,
    ) -> None:
        if not 0.0 <= alpha <= 1.0:
            raise errors.UsageError(f"alpha must lie in [0, 1], got {alpha}")

        X = design.check_matrix(X)
        y = family.validate_response(y)

        if y.shape != (X.shape[0],):
            raise errors.DimensionError(
                f"X has {X.shape[0]} rows, y has shape {y.shape}"
            )

        self.family = family
        self.cfg = cfg
        self.alpha = alpha
        self.n, self.p = X.shape
        self.y = y
        self.offset = check_offset(offset, self.n)
        self.offset_used = offset is not None

        if cfg.standardize:
            self.Xs, self.std = design.standardize(X)
        else:
            self.Xs = X
            self.std = design.Standardization.identity(self.p)

        if penalty_factors is None:
            pf = np.ones(self.p)
        else:
            pf = np.asarray(penalty_factors, dtype=np.float64)

            if pf.shape != (self.p,) or np.any(pf < 0.0):
                raise errors.UsageError(
                    "penalty factors must be non-negative, one per column"
                )

        self.pf = pf
        self.usable = ~self.std.constant
        self.unpenalized = self.usable & (pf == 0.0)

    def penalty(self, beta: FloatArray, lam: float) -> float:
        a = self.alpha

        return float(
            lam
            * np.sum(
                self.pf * (a * np.abs(beta) + (1.0 - a) * beta * beta / 2.0)
            )
        )

    def eta(self, b0: float, beta: FloatArray) -> FloatArray:
        nz = np.flatnonzero(beta)
        eta = self.offset + b0

        if nz.size:
            eta = eta + self.Xs[:, nz] @ beta[nz]

        return eta

    def objective(self, eta: FloatArray, beta: FloatArray, lam: float) -> float:
        return self.family.neg_loglik(eta, self.y) + self.penalty(beta, lam)

    def gradient(self, eta: FloatArray) -> FloatArray:
        """
        (1/n) Xs' (y - mu), the negative gradient of the mean loss.
        """
        resid = self.y - self.family.mean(eta)

        return self.Xs.T @ resid / self.n

    def null_intercept(self) -> float:
        """
        Intercept of the model with only the offset and an intercept.
        """
        family = self.family
        b0 = float(family.link(family.null_mean(self.y)))

        if not self.offset_used:
            return b0

        b0 -= float(np.mean(self.offset))

        for _ in range(100):
            eta = self.offset + b0
            score = float(np.mean(self.y - family.mean(eta)))
            info = float(np.mean(family.variance(eta)))

            if abs(score) < 1e-12:
                break

            b0 += score / max(info, self.cfg.weight_floor)

        return b0

    def to_fit(
        self,
        b0: float,
        beta: FloatArray,
        lam: float,
        n_iter: int,
        converged: bool,
    ) -> GlmFit:
        coef = np.where(self.usable, beta / self.std.scale, 0.0)
        intercept = b0 - float(np.dot(self.std.center, coef))
        eta = self.eta(b0, beta)

        return GlmFit(
            family=self.family,
            intercept=intercept,
            coefs={int(k): float(coef[k]) for k in np.flatnonzero(coef)},
            n_features=self.p,
            lambda_=float(lam),
            alpha=self.alpha,
            offset_used=self.offset_used,
            n_iter=n_iter,
            converged=converged,
            deviance=self.family.deviance(self.family.mean(eta), self.y),
            std=self.std,
        )


def _grid(
    prob: _Problem,
    n_lambda: int,
    lambda_min_ratio: float | None,
) -> FloatArray:
    eta = prob.offset + prob.null_intercept()
    grad = np.abs(prob.gradient(eta))
    penalized = prob.usable & (prob.pf > 0.0)

    lam_max = 0.0

    if np.any(penalized):
        lam_max = float(
            np.max(
                grad[penalized]
                / (max(prob.alpha, ALPHA_FLOOR) * prob.pf[penalized])
            )
        )

    if not lam_max > 0.0:
        # nothing can enter the model: response fully explained by the
        # intercept and offset
        lam_max = 1e-6

    if lambda_min_ratio is None:
        lambda_min_ratio = 1e-4 if prob.n > prob.p else 1e-2

    if n_lambda == 1:
        return np.array([lam_max])

    return np.exp(
        np.linspace(
            math.log(lam_max),
            math.log(lam_max * lambda_min_ratio),
            n_lambda,
        )
    )


def lambda_grid(
    family: Family,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    alpha: float | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    cfg: SolverConfig | None = None,
) -> FloatArray:
    """
    Log-spaced, strictly decreasing grid starting at lambda_max, the smallest
    lambda at which every penalized coefficient is zero.
    """
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha
    prob = _Problem(family, X, y, offset, alpha, penalty_factors, cfg)

    return _grid(prob, cfg.n_lambda, cfg.lambda_min_ratio)


def _sweep(
    prob: _Problem,
    cols: npt.NDArray[np.int64],
    lam: float,
    w: FloatArray,
    wr: FloatArray,
    beta: FloatArray,
    xw2: FloatArray,
) -> float:
    """
    One coordinate descent pass over `cols`. Updates `beta` and the weighted
    working residual `wr` in place and returns the largest change.
    """
    Xs = prob.Xs
    n = prob.n
    l1 = lam * prob.alpha
    l2 = lam * (1.0 - prob.alpha)
    dmax = 0.0

    for k in cols:
        x = Xs[:, k]
        bk = beta[k]
        u = float(x @ wr) / n + xw2[k] * bk
        thresh = l1 * prob.pf[k]

        if abs(u) <= thresh:
            new = 0.0
        else:
            new = (u - math.copysign(thresh, u)) / (xw2[k] + l2 * prob.pf[k])

        d = new - bk

        if d != 0.0:
            beta[k] = new
            wr -= d * (w * x)
            dmax = max(dmax, abs(d))

    return dmax


def _solve(
    prob: _Problem,
    lam: float,
    b0: float,
    beta: FloatArray,
    ever: npt.NDArray[np.bool_],
) -> t.Tuple[float, FloatArray, int, bool]:
    """
    Minimize the penalized objective at `lam` starting from `(b0, beta)`.
    `ever` (modified in place) holds the columns allowed to move; KKT
    violators outside it are added until none remain.
    """
    cfg = prob.cfg
    family = prob.family
    n = prob.n
    gaussian = family.kind == "gaussian"

    beta = beta.copy()
    sweeps = 0
    converged = False

    eta = prob.eta(b0, beta)
    obj = prob.objective(eta, beta, lam)

    for _ in range(cfg.irls_max_iter):
        mu = family.mean(eta)

        if gaussian:
            w = np.ones(n)
        else:
            w = np.maximum(family.variance(eta), cfg.weight_floor)

        # w * working residual, where the working residual is (y - mu) / w
        wr = prob.y - mu
        wsum = float(w.sum())

        xw2 = np.zeros(prob.p)
        have_xw2 = np.zeros(prob.p, dtype=bool)

        b0_old, beta_old = b0, beta.copy()

        while True:
            idx = np.flatnonzero(ever)
            todo = idx[~have_xw2[idx]]

            if todo.size:
                xw2[todo] = w @ (prob.Xs[:, todo] ** 2) / n
                have_xw2[todo] = True

            full = True

            while sweeps < cfg.max_iter:
                cols = idx if full else idx[beta[idx] != 0.0]
                dmax = _sweep(prob, cols, lam, w, wr, beta, xw2)

                d0 = float(wr.sum()) / wsum

                if d0 != 0.0:
                    b0 += d0
                    wr -= d0 * w
                    dmax = max(dmax, abs(d0))

                sweeps += 1

                if dmax < cfg.tol:
                    if full:
                        break

                    full = True
                else:
                    full = False

            # KKT check of the quadratic model over every other column
            rest = prob.usable & ~ever

            if not np.any(rest) or sweeps >= cfg.max_iter:
                break

            grad = np.abs(prob.Xs.T @ wr) / n
            violators = rest & (grad > lam * prob.alpha * prob.pf + 1e-12)

            if not np.any(violators):
                break

            ever |= violators

        eta_new = prob.eta(b0, beta)
        obj_new = prob.objective(eta_new, beta, lam)

        # step halving keeps the outer iterations monotone
        halvings = 0

        while obj_new > obj + 1e-12 * (1.0 + abs(obj)) and halvings < 30:
            b0 = (b0 + b0_old) / 2.0
            beta = (beta + beta_old) / 2.0
            eta_new = prob.eta(b0, beta)
            obj_new = prob.objective(eta_new, beta, lam)
            halvings += 1

        change = max(abs(b0 - b0_old), float(np.max(np.abs(beta - beta_old))))

        eta, obj = eta_new, obj_new

        if sweeps >= cfg.max_iter:
            break

        if gaussian or change < cfg.tol:
            converged = True
            break

    return b0, beta, sweeps, converged


def _fit_path(prob: _Problem, lambdas: FloatArray) -> t.List[GlmFit]:
    b0 = prob.null_intercept()
    beta = np.zeros(prob.p)
    fits: t.List[GlmFit] = []

    grad = prob.gradient(prob.eta(b0, beta))
    lam_prev = float(lambdas[0]) if len(lambdas) else 0.0

    for lam in lambdas:
        lam = float(lam)

        # sequential strong rule
        strong = prob.usable & (
            np.abs(grad)
            >= prob.alpha * prob.pf * (2.0 * lam - lam_prev) - 1e-12
        )
        ever = strong | (beta != 0.0) | prob.unpenalized

        b0, beta, sweeps, converged = _solve(prob, lam, b0, beta, ever)

        if not converged:
            logger.warning(
                "solver.not_converged",
                family=prob.family.kind,
                lam=lam,
                sweeps=sweeps,
            )

        fits.append(prob.to_fit(b0, beta, lam, sweeps, converged))

        grad = prob.gradient(prob.eta(b0, beta))
        lam_prev = lam

    return fits


def _check_grid(lambda_grid: npt.ArrayLike) -> FloatArray:
    lambdas = np.atleast_1d(np.asarray(lambda_grid, dtype=np.float64))

    if lambdas.ndim != 1 or lambdas.size == 0:
        raise errors.UsageError("lambda grid must be a non-empty vector")

    if np.any(lambdas < 0.0) or np.any(np.diff(lambdas) > 0.0):
        raise errors.UsageError(
            "lambda grid must be non-negative and descending"
        )

    return lambdas


def fit_path(
    family: Family,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    alpha: float | None = None,
    lambda_grid: npt.ArrayLike | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    cfg: SolverConfig | None = None,
) -> t.List[GlmFit]:
    """
    Fit the penalized GLM at every lambda of a descending grid.

    :param offset: Fixed additive term in the linear predictor, zero when
        omitted.
    :param lambda_grid: Descending lambdas. Defaults to the standard grid from
        `lambda_grid()`.
    :param penalty_factors: Per-column multipliers of the penalty; zero
        leaves a column unpenalized.
    """
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha
    prob = _Problem(family, X, y, offset, alpha, penalty_factors, cfg)

    if lambda_grid is None:
        lambdas = _grid(prob, cfg.n_lambda, cfg.lambda_min_ratio)
    else:
        lambdas = _check_grid(lambda_grid)

    return _fit_path(prob, lambdas)


def predict(
    fit: GlmFit,
    X: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
) -> t.Tuple[FloatArray, FloatArray]:
    """
    Returns `(mu, theta)`: the fitted means b'(theta) and the natural
    parameters theta = intercept + X beta + offset.
    """
    theta = fit.linear_predictor(X, offset)

    return fit.family.mean(theta), theta


def assign_folds(n: int, n_folds: int, seed: int) -> npt.NDArray[np.int64]:
    """
    Deterministic, balanced fold ids in [0, n_folds) for `n` rows.
    """
    if n_folds < 2:
        raise errors.UsageError("at least two folds are needed")

    if n < n_folds:
        raise errors.UsageError(f"{n} rows cannot fill {n_folds} folds")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % n_folds

    return folds


def cv_fit(
    family: Family,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    alpha: float | None = None,
    n_folds: int = 5,
    seed: int = 0,
    lambda_grid: npt.ArrayLike | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    cfg: SolverConfig | None = None,
    ctx: context.Context | None = None,
    folds: npt.ArrayLike | None = None,
) -> CvResult:
    """
    K-fold cross-validation of the lambda path. Held-out deviance is computed
    with the offset applied; `lambda_min` minimizes the fold average.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha

    X = design.check_matrix(X)
    y = family.validate_response(y)
    n = X.shape[0]
    offset_arr = None if offset is None else check_offset(offset, n)

    prob = _Problem(family, X, y, offset_arr, alpha, penalty_factors, cfg)

    if lambda_grid is None:
        lambdas = _grid(prob, cfg.n_lambda, cfg.lambda_min_ratio)
    else:
        lambdas = _check_grid(lambda_grid)

    if folds is None:
        foldid = assign_folds(n, n_folds, seed)
    else:
        foldid = np.asarray(folds, dtype=np.int64)
        n_folds = int(foldid.max()) + 1

    def run(k: int) -> FloatArray | t.List[GlmFit] | None:
        if k < 0:
            return _fit_path(prob, lambdas)

        train = foldid != k
        test = ~train

        if family.kind == "binomial" and np.unique(y[train]).size < 2:
            logger.warning("cv.fold_skipped", fold=k, reason="single class")

            return None

        fold_prob = _Problem(
            family,
            X[train],
            y[train],
            None if offset_arr is None else offset_arr[train],
            alpha,
            penalty_factors,
            cfg,
        )
        fits = _fit_path(fold_prob, lambdas)
        off_test = None if offset_arr is None else offset_arr[test]
        n_test = int(test.sum())

        return np.array(
            [
                family.deviance(predict(fit, X[test], off_test)[0], y[test])
                / n_test
                for fit in fits
            ]
        )

    results = ctx.map(run, [-1] + list(range(n_folds)))

    path = t.cast(t.List[GlmFit], results[0])
    fold_dev = [r for r in results[1:] if r is not None]

    if not fold_dev:
        raise errors.InputError("every cross-validation fold is degenerate")

    dev = np.vstack(t.cast(t.List[FloatArray], fold_dev))
    cv_dev = dev.mean(axis=0)
    cv_se = dev.std(axis=0) / math.sqrt(dev.shape[0])
    best = int(np.argmin(cv_dev))

    return CvResult(
        lambda_grid=lambdas,
        cv_deviance=cv_dev,
        cv_se=cv_se,
        lambda_min=float(lambdas[best]),
        index_min=best,
        fold_assignment=foldid,
        path=path,
        n_folds_used=dev.shape[0],
    )


def kkt_residual(
    fit: GlmFit,
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    penalty_factors: npt.ArrayLike | None = None,
) -> float:
    """
    Largest violation of the stationarity conditions of `fit`, evaluated on
    the standardized scale the solver works on.
    """
    X = design.check_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    std = fit.std or design.Standardization.identity(X.shape[1])
    Xs = std.apply(X)
    n = X.shape[0]

    pf = (
        np.ones(X.shape[1])
        if penalty_factors is None
        else np.asarray(penalty_factors, dtype=np.float64)
    )

    mu, _ = predict(fit, X, offset)
    grad = Xs.T @ (y - mu) / n
    beta = fit.dense() * std.scale

    lam, a = fit.lambda_, fit.alpha
    active = beta != 0.0
    usable = ~std.constant

    resid = np.zeros_like(grad)
    resid[active] = np.abs(
        grad[active]
        - lam * (1.0 - a) * pf[active] * beta[active]
        - lam * a * pf[active] * np.sign(beta[active])
    )
    inactive = usable & ~active
    resid[inactive] = np.maximum(
        np.abs(grad[inactive]) - lam * a * pf[inactive], 0.0
    )

    return float(max(np.max(resid, initial=0.0), abs(np.mean(y - mu))))
