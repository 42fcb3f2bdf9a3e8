"""
Proportional odds regression with an elastic-net penalty, and the sprinter
pipeline on top of it.

Responses are categories 1..K, K = k + 1. With cutpoints c_1 <= ... <= c_k
and shared coefficients b

    logit P(Y <= t | x) = c_t - (x' b + offset)

so a larger x' b moves probability towards the higher categories.

Score and Fisher information are assembled from per-observation k-vectors
V_i and tridiagonal k x k matrices W_i without building the nk x (k + p)
stacked design:

    U_c = sum_i V_i                   U_b = -X' (1' V_i)
    I_cc = sum_i W_i                  I_cb = -sum_i (W_i 1) x_i'
    I_bb = X' diag(1' W_i 1) X
"""

from dataclasses import dataclass, field
import math
import typing as t

import numpy as np
from numpy import typing as npt
from scipy import linalg, special
from sklearn.isotonic import IsotonicRegression

from sprinter import context, design, errors, logging, penalized
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import ScreenConfig, SolverConfig, SprinterConfig
from sprinter.design import PairIndex, Standardization
from sprinter.simulate import Evaluation

__all__ = (
    "PROBABILITY_FLOOR",
    "ScoreInfo",
    "OrdinalFit",
    "OrdinalPath",
    "OrdinalInteractionModel",
    "OrdinalSprinterModel",
    "categories",
    "ordinal_score_info",
    "ordinal_score_info_naive",
    "ordinal_lambda_grid",
    "ordinal_path",
    "fit_ordinalnet",
    "ordinal_deviance",
    "ordinal_kernel",
    "sprinter_ordinal",
    "evaluate_ordinal",
)


FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

logger = logging.get_logger(__name__)

PROBABILITY_FLOOR = 1e-12


def categories(
    y: npt.ArrayLike,
    n_categories: int | None = None,
    require_all: bool = True,
) -> t.Tuple[IntArray, int]:
    """
    Zero-based category codes and the number of categories K.

    `y` holds integers 1..K, or is an n x K one-hot matrix. K defaults to the
    largest observed category.
    """
    arr = np.asarray(y, dtype=np.float64)

    if arr.ndim == 2:
        if np.any((arr != 0.0) & (arr != 1.0)) or np.any(arr.sum(axis=1) != 1):
            raise errors.InputError("one-hot rows must hold a single 1")

        n_categories = n_categories or arr.shape[1]
        arr = arr.argmax(axis=1) + 1.0

    if arr.ndim != 1:
        raise errors.DimensionError("categories must be a vector")

    if not np.all(np.isfinite(arr)):
        raise errors.InputError("categories contain non-finite values")

    if np.any(arr != np.round(arr)) or np.any(arr < 1.0):
        raise errors.InputError("categories must be integers starting at 1")

    codes = arr.astype(np.int64) - 1
    K = int(codes.max()) + 1 if n_categories is None else n_categories

    if codes.max() >= K:
        raise errors.InputError(
            f"category {int(codes.max()) + 1} exceeds the {K} categories"
        )

    if require_all:
        counts = np.bincount(codes, minlength=K)

        if np.count_nonzero(counts) < 2:
            raise errors.InputError("an ordinal response needs two categories")

        missing = np.flatnonzero(counts == 0)

        if missing.size:
            raise errors.InputError(
                f"category {int(missing[0]) + 1} has no observations"
            )

    return codes, K


class _Terms(t.NamedTuple):
    """
    Per-observation pieces at one parameter value. Leading dimensions follow
    the linear predictor, the last one runs over cutpoints or categories.
    """

    # P(Y = category), floored
    prob: FloatArray
    # d log P(Y = y) / d eta
    V: FloatArray
    # diagonal and first off-diagonal of W
    diag: FloatArray
    off: FloatArray
    loglik: FloatArray
    floored: int

    @property
    def u(self) -> FloatArray:
        """
        W 1, the row sums of W.
        """
        u = self.diag.copy()
        u[..., :-1] += self.off
        u[..., 1:] += self.off

        return u

    @property
    def v(self) -> FloatArray:
        return self.V.sum(axis=-1)

    @property
    def omega(self) -> FloatArray:
        return self.diag.sum(axis=-1) + 2.0 * self.off.sum(axis=-1)


def _probabilities(
    lin: FloatArray,
    c: FloatArray,
) -> t.Tuple[FloatArray, FloatArray, int]:
    delta = special.expit(c - lin[..., None])
    s = delta * (1.0 - delta)

    edge = np.zeros(lin.shape + (1,))
    prob = np.diff(np.concatenate([edge, delta, edge + 1.0], axis=-1), axis=-1)
    floored = int(np.count_nonzero(prob < PROBABILITY_FLOOR))

    return np.maximum(prob, PROBABILITY_FLOOR), s, floored


def _terms(lin: FloatArray, c: FloatArray, codes: IntArray) -> _Terms:
    k = c.shape[0]
    prob, s, floored = _probabilities(lin, c)

    yy = np.broadcast_to(
        codes.reshape(codes.shape + (1,) * (lin.ndim - 1)), lin.shape
    )
    py = np.take_along_axis(prob, yy[..., None], axis=-1)[..., 0]

    cuts = np.arange(k)
    hit = (cuts == yy[..., None]).astype(np.float64)
    hit -= cuts == yy[..., None] - 1
    V = s * hit / py[..., None]

    diag = s * s * (1.0 / prob[..., :k] + 1.0 / prob[..., 1:])
    off = -s[..., :-1] * s[..., 1:] / prob[..., 1:k]

    return _Terms(
        prob=prob,
        V=V,
        diag=diag,
        off=off,
        loglik=np.log(py).sum(axis=0),
        floored=floored,
    )


def _tridiagonal(diag: FloatArray, off: FloatArray) -> FloatArray:
    ret = np.diag(diag)

    if off.size:
        ret += np.diag(off, 1) + np.diag(off, -1)

    return ret


def _solve_cutpoints(
    diag: FloatArray,
    off: FloatArray,
    rhs: FloatArray,
) -> FloatArray:
    """
    Solve the tridiagonal cutpoint system I_cc x = rhs.
    """
    k = diag.shape[0]
    ab = np.zeros((2, k))
    ab[0, 1:] = off
    ab[1] = diag * (1.0 + 1e-12) + 1e-300

    try:
        return linalg.solveh_banded(ab, rhs)
    except linalg.LinAlgError as e:
        raise errors.NumericalError(
            "cutpoint information is not positive definite"
        ) from e


def _monotone(c: FloatArray) -> FloatArray:
    """
    Least squares projection onto non-decreasing cutpoints.
    """
    if c.shape[0] < 2 or np.all(np.diff(c) >= 0.0):
        return c

    iso = IsotonicRegression(increasing=True)

    return iso.fit_transform(np.arange(c.shape[0]), c)


@dataclass(frozen=True, kw_only=True)
class ScoreInfo:
    """
    Full-data score and Fisher information in blocks, cutpoints first.
    """

    score_c: FloatArray
    score_b: FloatArray
    info_cc: FloatArray
    info_cb: FloatArray
    info_bb: FloatArray
    loglik: float

    @property
    def score(self) -> FloatArray:
        return np.concatenate([self.score_c, self.score_b])

    def dense(self) -> FloatArray:
        return np.block(
            [
                [self.info_cc, self.info_cb],
                [self.info_cb.T, self.info_bb],
            ]
        )


def _arguments(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    c: npt.ArrayLike,
    b: npt.ArrayLike,
    offset: npt.ArrayLike | None,
) -> t.Tuple[FloatArray, IntArray, FloatArray, FloatArray, FloatArray]:
    X = design.check_matrix(X)
    n, p = X.shape
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)

    if c.ndim != 1 or c.shape[0] < 1:
        raise errors.UsageError("at least one cutpoint is needed")

    if b.shape != (p,):
        raise errors.DimensionError(f"b has shape {b.shape}, expected ({p},)")

    codes, _ = categories(y, c.shape[0] + 1, require_all=False)

    if codes.shape != (n,):
        raise errors.DimensionError(f"X has {n} rows, y has {codes.shape[0]}")

    off = penalized.check_offset(offset, n)

    return X, codes, c, b, off


def ordinal_score_info(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    c: npt.ArrayLike,
    b: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
) -> ScoreInfo:
    """
    Score and Fisher information of the log-likelihood at `(c, b)`.
    """
    X, codes, c, b, off = _arguments(X, y, c, b, offset)
    terms = _terms(X @ b + off, c, codes)

    if terms.floored:
        logger.warning("ordinal.probability_floored", count=terms.floored)

    u = terms.u
    omega = terms.omega

    return ScoreInfo(
        score_c=terms.V.sum(axis=0),
        score_b=-(X.T @ terms.v),
        info_cc=_tridiagonal(terms.diag.sum(axis=0), terms.off.sum(axis=0)),
        info_cb=-(u.T @ X),
        info_bb=(X * omega[:, None]).T @ X,
        loglik=float(terms.loglik),
    )


def ordinal_score_info_naive(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    c: npt.ArrayLike,
    b: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
) -> ScoreInfo:
    """
    The same quantities summed observation by observation over the stacked
    design X_i = [I_k | -1 x_i'], with W_i = D' diag(1 / P) D built from the
    Jacobian D of the category probabilities.
    """
    X, codes, c, b, off = _arguments(X, y, c, b, offset)
    n, p = X.shape
    k = c.shape[0]

    score = np.zeros(k + p)
    info = np.zeros((k + p, k + p))
    loglik = 0.0

    for i in range(n):
        x = X[i]
        delta = special.expit(c - (x @ b + off[i]))
        s = delta * (1.0 - delta)
        prob = np.maximum(np.diff(np.r_[0.0, delta, 1.0]), PROBABILITY_FLOOR)

        D = np.zeros((k + 1, k))

        for j in range(k):
            D[j, j] = s[j]
            D[j + 1, j] = -s[j]

        grad = np.zeros(k + 1)
        grad[codes[i]] = 1.0 / prob[codes[i]]

        Xi = np.hstack([np.eye(k), -np.outer(np.ones(k), x)])
        score += Xi.T @ (D.T @ grad)
        info += Xi.T @ (D.T @ np.diag(1.0 / prob) @ D) @ Xi
        loglik += math.log(prob[codes[i]])

    return ScoreInfo(
        score_c=score[:k],
        score_b=score[k:],
        info_cc=info[:k, :k],
        info_cb=info[:k, k:],
        info_bb=info[k:, k:],
        loglik=loglik,
    )


def ordinal_deviance(prob: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """
    -2 sum_i log P(Y_i = y_i) from an n x K probability matrix.
    """
    prob = np.asarray(prob, dtype=np.float64)
    codes, _ = categories(y, prob.shape[1], require_all=False)
    picked = prob[np.arange(codes.shape[0]), codes]

    return float(-2.0 * np.sum(np.log(np.maximum(picked, PROBABILITY_FLOOR))))


def _cumulative(
    cutpoints: FloatArray,
    lin: FloatArray,
) -> FloatArray:
    return special.expit(cutpoints[None, :] - lin[:, None])


def _category_probabilities(
    cutpoints: FloatArray,
    lin: FloatArray,
) -> FloatArray:
    delta = _cumulative(cutpoints, lin)
    edge = np.zeros((lin.shape[0], 1))

    return np.diff(np.hstack([edge, delta, edge + 1.0]), axis=1)


class _Predicts:
    """
    Predictions shared by every ordinal model, given `cutpoints` and a
    `linear_predictor` for x' b.
    """

    kind: t.ClassVar[str] = "ordinal"
    cutpoints: FloatArray

    def linear_predictor(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        raise NotImplementedError

    @property
    def n_categories(self) -> int:
        return int(self.cutpoints.shape[0]) + 1

    def cumulative(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        """
        n x k matrix of P(Y <= t).
        """
        return _cumulative(self.cutpoints, self.linear_predictor(X, offset))

    def predict_proba(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        return _category_probabilities(
            self.cutpoints, self.linear_predictor(X, offset)
        )

    def expected_category(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        prob = self.predict_proba(X, offset)

        return prob @ np.arange(1.0, prob.shape[1] + 1.0)

    def predict_class(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> IntArray:
        return self.predict_proba(X, offset).argmax(axis=1) + 1

    def predict(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        return self.expected_category(X, offset)

    def deviance(
        self,
        X: npt.ArrayLike,
        y: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> float:
        return ordinal_deviance(self.predict_proba(X, offset), y)


@dataclass(frozen=True, kw_only=True)
class OrdinalFit(_Predicts):
    # non-decreasing, original scale
    cutpoints: FloatArray
    # nonzero coefficients only, original scale
    coefs: t.Mapping[int, float]
    n_features: int
    lambda_: float
    alpha: float
    offset_used: bool
    # proximal Newton iterations
    n_iter: int
    converged: bool
    # training deviance, offset included
    train_deviance: float
    std: Standardization | None = field(default=None, repr=False)
    # penalized objective after every accepted iteration
    objective_trace: t.Tuple[float, ...] = field(default=(), repr=False)

    def coef(self, k: int) -> float:
        return self.coefs.get(k, 0.0)

    def dense(self) -> FloatArray:
        ret = np.zeros(self.n_features)

        for k, v in self.coefs.items():
            ret[k] = v

        return ret

    @property
    def support(self) -> t.Tuple[int, ...]:
        return tuple(sorted(self.coefs))

    def linear_predictor(
        self,
        X: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
    ) -> FloatArray:
        """
        x' b plus the offset, without cutpoints.
        """
        X = np.asarray(X, dtype=np.float64)

        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise errors.DimensionError(
                f"fit has {self.n_features} features, X has shape {X.shape}"
            )

        lin = np.zeros(X.shape[0])

        if self.coefs:
            idx = np.fromiter(self.coefs.keys(), dtype=np.int64)
            val = np.fromiter(self.coefs.values(), dtype=np.float64)
            lin = X[:, idx] @ val

        if offset is not None:
            lin = lin + penalized.check_offset(offset, X.shape[0])

        return lin


class _Problem:
    """
    Standardized data and penalty bookkeeping shared along a path.
    """

    def __init__(
        self,
        X: npt.ArrayLike,
        y: npt.ArrayLike,
        offset: npt.ArrayLike | None,
        alpha: float,
        penalty_factors: npt.ArrayLike | None,
        cfg: SolverConfig,
        n_categories: int | None = None,
    ) -> None:
        if not 0.0 <= alpha <= 1.0:
            raise errors.UsageError(f"alpha must lie in [0, 1], got {alpha}")

        X = design.check_matrix(X)
        self.codes, self.K = categories(y, n_categories)

        if self.codes.shape != (X.shape[0],):
            raise errors.DimensionError(
                f"X has {X.shape[0]} rows, y has {self.codes.shape[0]}"
            )

        self.cfg = cfg
        self.alpha = alpha
        self.n, self.p = X.shape
        self.k = self.K - 1
        self.offset = penalized.check_offset(offset, self.n)
        self.offset_used = offset is not None

        if cfg.standardize:
            self.Xs, self.std = design.standardize(X)
        else:
            self.Xs = X
            self.std = Standardization.identity(self.p)

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

    def lin(self, beta: FloatArray) -> FloatArray:
        nz = np.flatnonzero(beta)

        if nz.size == 0:
            return self.offset

        return self.offset + self.Xs[:, nz] @ beta[nz]

    def terms(self, c: FloatArray, beta: FloatArray) -> _Terms:
        return _terms(self.lin(beta), c, self.codes)

    def penalty(self, beta: FloatArray, lam: float) -> float:
        a = self.alpha

        return float(
            lam
            * np.sum(
                self.pf * (a * np.abs(beta) + (1.0 - a) * beta * beta / 2.0)
            )
        )

    def objective(self, terms: _Terms, beta: FloatArray, lam: float) -> float:
        return -float(terms.loglik) / self.n + self.penalty(beta, lam)

    def null_cutpoints(self) -> FloatArray:
        """
        Cutpoints of the model with the offset alone: the empirical cumulative
        logits, refined by Newton when an offset is present.
        """
        counts = np.bincount(self.codes, minlength=self.K)
        cum = np.cumsum(counts)[:-1] / self.n
        c = special.logit(cum) + float(np.mean(self.offset))

        if not self.offset_used:
            return c

        beta = np.zeros(self.p)
        terms = self.terms(c, beta)

        for _ in range(100):
            g = terms.V.sum(axis=0)

            if np.max(np.abs(g)) / self.n < 1e-12:
                break

            d = _solve_cutpoints(
                terms.diag.sum(axis=0), terms.off.sum(axis=0), g
            )
            step = 1.0

            for _ in range(30):
                new = _monotone(c + step * d)
                new_terms = self.terms(new, beta)

                if new_terms.loglik >= terms.loglik:
                    break

                step /= 2.0
            else:
                break

            c, terms = new, new_terms

        return c

    def to_fit(
        self,
        c: FloatArray,
        beta: FloatArray,
        lam: float,
        n_iter: int,
        converged: bool,
        trace: t.Sequence[float],
    ) -> OrdinalFit:
        coef = np.where(self.usable, beta / self.std.scale, 0.0)
        terms = self.terms(c, beta)

        return OrdinalFit(
            cutpoints=c + float(np.dot(self.std.center, coef)),
            coefs={int(k): float(coef[k]) for k in np.flatnonzero(coef)},
            n_features=self.p,
            lambda_=float(lam),
            alpha=self.alpha,
            offset_used=self.offset_used,
            n_iter=n_iter,
            converged=converged,
            train_deviance=-2.0 * float(terms.loglik),
            std=self.std,
            objective_trace=tuple(trace),
        )


def _quadratic(
    prob: _Problem,
    terms: _Terms,
    beta: FloatArray,
    lam: float,
) -> t.Tuple[FloatArray, FloatArray]:
    """
    Minimize the penalized quadratic model of the objective around the
    current point by block coordinate descent: an exact cutpoint solve, then
    a coordinate pass over the coefficients.

    Returns the cutpoint step and the new coefficients.
    """
    cfg = prob.cfg
    Xs, n = prob.Xs, prob.n
    l1 = lam * prob.alpha
    l2 = lam * (1.0 - prob.alpha)

    u = terms.u
    omega = terms.omega
    g_c = terms.V.sum(axis=0)
    g_b = -(Xs.T @ terms.v)
    diag = terms.diag.sum(axis=0)
    off = terms.off.sum(axis=0)

    usable = np.flatnonzero(prob.usable)
    curv = np.zeros(prob.p)
    curv[usable] = omega @ (Xs[:, usable] ** 2) / n

    new = beta.copy()
    # Xs (new - beta)
    r = np.zeros(n)
    dc = np.zeros(prob.k)
    full = True

    for _ in range(cfg.max_iter):
        dc_old = dc
        dc = _solve_cutpoints(diag, off, g_c + u.T @ r)
        h = omega * r - u @ dc
        dmax = float(np.max(diag * (dc - dc_old) ** 2)) / n

        cols = usable if full else usable[new[usable] != 0.0]

        for j in cols:
            x = Xs[:, j]
            grad = (float(x @ h) - g_b[j]) / n
            z = curv[j] * new[j] - grad
            thresh = l1 * prob.pf[j]

            if abs(z) <= thresh:
                value = 0.0
            else:
                value = (z - math.copysign(thresh, z)) / (
                    curv[j] + l2 * prob.pf[j]
                )

            d = value - new[j]

            if d != 0.0:
                new[j] = value
                r += d * x
                h += d * omega * x
                dmax = max(dmax, curv[j] * d * d)

        if dmax < cfg.tol:
            if full:
                break

            full = True
        else:
            full = False

    dc = _solve_cutpoints(diag, off, g_c + u.T @ r)

    return dc, new


def _solve(
    prob: _Problem,
    lam: float,
    c: FloatArray,
    beta: FloatArray,
) -> t.Tuple[FloatArray, FloatArray, int, bool, t.List[float]]:
    """
    Proximal Newton at `lam`. Every accepted step lowers the penalized
    objective; cutpoints are projected back to non-decreasing order before
    each trial point is scored.
    """
    cfg = prob.cfg
    terms = prob.terms(c, beta)
    obj = prob.objective(terms, beta, lam)
    trace = [obj]
    converged = False
    it = 0

    for it in range(1, cfg.irls_max_iter + 1):
        dc, target = _quadratic(prob, terms, beta, lam)
        db = target - beta

        if max(np.max(np.abs(dc)), np.max(np.abs(db), initial=0.0)) < cfg.tol:
            converged = True
            break

        step = 1.0

        for _ in range(30):
            c_new = _monotone(c + step * dc)
            beta_new = beta + step * db
            terms_new = prob.terms(c_new, beta_new)
            obj_new = prob.objective(terms_new, beta_new, lam)

            if obj_new <= obj:
                break

            step /= 2.0
        else:
            # no descent along the model direction: stationary up to
            # rounding
            converged = True
            break

        decrease = obj - obj_new
        c, beta, terms, obj = c_new, beta_new, terms_new, obj_new
        trace.append(obj)

        if decrease <= cfg.tol * (1.0 + abs(obj)):
            converged = True
            break

    if terms.floored:
        logger.warning(
            "ordinal.probability_floored", count=terms.floored, lam=lam
        )

    return c, beta, it, converged, trace


def _grid(
    prob: _Problem,
    c0: FloatArray,
    n_lambda: int,
    lambda_min_ratio: float | None,
) -> FloatArray:
    terms = prob.terms(c0, np.zeros(prob.p))
    grad = np.abs(prob.Xs.T @ terms.v) / prob.n
    penal = prob.usable & (prob.pf > 0.0)

    lam_max = 0.0

    if np.any(penal):
        lam_max = float(
            np.max(
                grad[penal]
                / (max(prob.alpha, penalized.ALPHA_FLOOR) * prob.pf[penal])
            )
        )

    if not lam_max > 0.0:
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


def _lambdas(
    prob: _Problem,
    c0: FloatArray,
    lambda_grid: npt.ArrayLike | None,
    cfg: SolverConfig,
) -> FloatArray:
    if lambda_grid is None:
        return _grid(prob, c0, cfg.n_lambda, cfg.lambda_min_ratio)

    lambdas = np.atleast_1d(np.asarray(lambda_grid, dtype=np.float64))

    if np.any(lambdas < 0.0) or np.any(np.diff(lambdas) > 0.0):
        raise errors.UsageError(
            "lambda grid must be non-negative and descending"
        )

    return lambdas


def _fit_path(prob: _Problem, lambdas: FloatArray) -> t.List[OrdinalFit]:
    c = prob.null_cutpoints()
    beta = np.zeros(prob.p)
    fits: t.List[OrdinalFit] = []

    for lam in lambdas:
        lam = float(lam)
        c, beta, n_iter, converged, trace = _solve(prob, lam, c, beta)

        if not converged:
            logger.warning(
                "solver.not_converged",
                family="ordinal",
                lam=lam,
                iterations=n_iter,
            )

        fits.append(prob.to_fit(c, beta, lam, n_iter, converged, trace))

    return fits


def ordinal_lambda_grid(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    alpha: float | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    cfg: SolverConfig | None = None,
) -> FloatArray:
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha
    prob = _Problem(X, y, offset, alpha, penalty_factors, cfg)

    return _grid(
        prob, prob.null_cutpoints(), cfg.n_lambda, cfg.lambda_min_ratio
    )


def ordinal_path(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    alpha: float | None = None,
    lambda_grid: npt.ArrayLike | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    cfg: SolverConfig | None = None,
) -> t.List[OrdinalFit]:
    """
    Fit the penalized proportional odds model at every lambda of a
    descending grid, warm started from the null model.
    """
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha
    prob = _Problem(X, y, offset, alpha, penalty_factors, cfg)
    lambdas = _lambdas(prob, prob.null_cutpoints(), lambda_grid, cfg)

    return _fit_path(prob, lambdas)


@dataclass(frozen=True, kw_only=True)
class OrdinalPath:
    lambda_grid: FloatArray
    # fold-averaged held-out deviance per observation
    cv_deviance: FloatArray
    cv_se: FloatArray
    lambda_min: float
    index_min: int
    fold_assignment: IntArray
    path: t.Sequence[OrdinalFit] = field(repr=False)
    n_folds_used: int = 0

    @property
    def best(self) -> OrdinalFit:
        return self.path[self.index_min]


def fit_ordinalnet(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    alpha: float | None = None,
    lambda_grid: npt.ArrayLike | None = None,
    cv_folds: int = 5,
    seed: int = 0,
    cfg: SolverConfig | None = None,
    offset: npt.ArrayLike | None = None,
    penalty_factors: npt.ArrayLike | None = None,
    ctx: context.Context | None = None,
) -> OrdinalPath:
    """
    Cross-validated penalized proportional odds path.

    Folds whose training rows miss a category are skipped. Every category
    1..K must occur in the full data.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or SolverConfig()
    alpha = cfg.alpha if alpha is None else alpha

    prob = _Problem(X, y, offset, alpha, penalty_factors, cfg)
    lambdas = _lambdas(prob, prob.null_cutpoints(), lambda_grid, cfg)
    X = design.check_matrix(X)
    codes, K = prob.codes, prob.K
    off = prob.offset if prob.offset_used else None
    foldid = penalized.assign_folds(prob.n, cv_folds, seed)

    def run(k: int) -> FloatArray | t.List[OrdinalFit] | None:
        if k < 0:
            return _fit_path(prob, lambdas)

        train = foldid != k
        test = ~train

        if np.unique(codes[train]).size < K:
            logger.warning("cv.fold_skipped", fold=k, reason="missing category")

            return None

        fold = _Problem(
            X[train],
            codes[train] + 1,
            None if off is None else off[train],
            alpha,
            penalty_factors,
            cfg,
            n_categories=K,
        )
        fits = _fit_path(fold, lambdas)
        off_test = None if off is None else off[test]
        n_test = int(test.sum())

        return np.array(
            [
                fit.deviance(X[test], codes[test] + 1, off_test) / n_test
                for fit in fits
            ]
        )

    results = ctx.map(run, [-1] + list(range(cv_folds)))

    path = t.cast(t.List[OrdinalFit], results[0])
    fold_dev = [r for r in results[1:] if r is not None]

    if not fold_dev:
        raise errors.InputError("every cross-validation fold is degenerate")

    dev = np.vstack(t.cast(t.List[FloatArray], fold_dev))
    cv_dev = dev.mean(axis=0)
    best = int(np.argmin(cv_dev))

    return OrdinalPath(
        lambda_grid=lambdas,
        cv_deviance=cv_dev,
        cv_se=dev.std(axis=0) / math.sqrt(dev.shape[0]),
        lambda_min=float(lambdas[best]),
        index_min=best,
        fold_assignment=foldid,
        path=path,
        n_folds_used=dev.shape[0],
    )


def _newton_gamma(
    Z: FloatArray,
    codes: IntArray,
    offset: FloatArray,
    cutpoints: FloatArray,
    bound: float,
    max_iter: int,
    tol: float,
) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
    """
    Bracketed Fisher scoring for one coefficient per column with the
    cutpoints held fixed. The log-likelihood is concave in gamma, so the sign
    of the score shrinks the bracket.
    """
    n, width = Z.shape
    gamma = np.zeros(width)
    lo = np.full(width, -bound)
    hi = np.full(width, bound)
    done = np.zeros(width, dtype=bool)

    for _ in range(max_iter):
        act = np.flatnonzero(~done)

        if act.size == 0:
            break

        Za = Z[:, act]
        g = gamma[act]
        terms = _terms(offset[:, None] + Za * g, cutpoints, codes)
        score = -np.einsum("ij,ij->j", Za, terms.v)
        info = np.einsum("ij,ij->j", Za * Za, terms.omega)

        converged = np.abs(score) / n < tol
        converged |= (hi[act] - lo[act]) <= 1e-12 * bound
        done[act[converged]] = True

        lo[act] = np.where(score > 0.0, g, lo[act])
        hi[act] = np.where(score < 0.0, g, hi[act])

        with np.errstate(divide="ignore", invalid="ignore"):
            step = g + score / info

        outside = ~np.isfinite(step) | (step <= lo[act]) | (step >= hi[act])
        step = np.where(outside, (lo[act] + hi[act]) / 2.0, step)

        gamma[act] = np.where(converged, g, step)

    return gamma, ~done


def ordinal_kernel(
    codes: IntArray,
    offset: FloatArray,
    cutpoints: FloatArray,
    cfg: ScreenConfig,
) -> screening.Kernel:
    """
    Screening kernel for proportional odds responses: the one dimensional
    MLE of gamma in c_t - (offset + z gamma) for every column of a block.
    """

    def kernel(Z: FloatArray) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
        width = Z.shape[1]
        gamma = np.zeros(width)
        failed = np.zeros(width, dtype=bool)
        cols = np.flatnonzero(np.any(Z != 0.0, axis=0))

        if cols.size:
            g, bad = _newton_gamma(
                Z[:, cols],
                codes,
                offset,
                cutpoints,
                cfg.bound,
                cfg.max_iter,
                cfg.tol,
            )
            gamma[cols] = g
            failed[cols] = bad

        return gamma, failed

    return kernel


@dataclass(frozen=True, kw_only=True)
class OrdinalInteractionModel(_Predicts):
    """
    logit P(Y <= t | x) = c_t - (x' main_coefs + sum_j delta_j z_j(x)).
    """

    cutpoints: FloatArray
    main_coefs: FloatArray
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

        lin = X @ self.main_coefs

        if self.interactions:
            std = self.std or Standardization.identity(self.n_features)
            pairs = [pair for pair, _ in self.interactions]
            delta = np.array([value for _, value in self.interactions])
            lin = lin + design.selected_columns(X, std, pairs) @ delta

        if offset is not None:
            lin = lin + np.asarray(offset, dtype=np.float64)

        return lin


@dataclass(frozen=True, kw_only=True)
class OrdinalSprinterModel:
    model: OrdinalInteractionModel
    step1: OrdinalFit
    screen: screening.ScreenResult
    step4: OrdinalFit
    lambda1: float
    lambda4: float
    degenerate: bool
    cfg: SprinterConfig = field(repr=False)

    kind: t.ClassVar[str] = "ordinal"

    @property
    def cutpoints(self) -> FloatArray:
        return self.model.cutpoints

    @property
    def main_coefs(self) -> FloatArray:
        return self.model.main_coefs

    @property
    def interactions(self) -> t.Tuple[t.Tuple[PairIndex, float], ...]:
        return self.model.interactions

    def linear_predictor(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.linear_predictor(X)

    def predict_proba(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.predict_proba(X)

    def predict_class(self, X: npt.ArrayLike) -> IntArray:
        return self.model.predict_class(X)

    def predict(self, X: npt.ArrayLike) -> FloatArray:
        return self.model.predict(X)


def sprinter_ordinal(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: SprinterConfig | None = None,
    ctx: context.Context | None = None,
) -> OrdinalSprinterModel:
    """
    Sprinter for ordinal responses. Screening fits one coefficient per
    candidate with the step 1 cutpoints fixed; step 4 re-estimates the
    cutpoints with the step 1 linear predictor as offset.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or SprinterConfig()
    X = design.check_matrix(X)
    codes, K = categories(y)
    n, p = X.shape

    if codes.shape != (n,):
        raise errors.DimensionError(f"X has {n} rows, y has {codes.shape[0]}")

    if n < 10 or p < 2:
        raise errors.UsageError(f"need n >= 10 and p >= 2, got n={n} p={p}")

    if cfg.tuning != "sequential":
        raise errors.UsageError(
            "ordinal responses support sequential tuning only"
        )

    y = codes + 1
    log = logger.bind(family="ordinal", categories=K)
    log.info("pipeline.start", n=n, p=p)

    step1 = fit_ordinalnet(
        X, y, cv_folds=cfg.cv_folds, seed=cfg.seed, cfg=cfg.solver, ctx=ctx
    )
    fit1 = step1.best
    offset = fit1.linear_predictor(X)

    Xs, std = design.standardize(X)
    res = screening.screen(
        None,
        Xs,
        y,
        offset,
        cfg=cfg.screen,
        ctx=ctx,
        kernel=ordinal_kernel(codes, offset, fit1.cutpoints, cfg.screen),
    )

    pairs = res.pairs
    W = X

    if pairs:
        W = np.asfortranarray(
            np.hstack([X, design.selected_columns(X, std, pairs)])
        )

    step4 = fit_ordinalnet(
        W,
        y,
        cv_folds=cfg.cv_folds,
        seed=cfg.seed,
        cfg=cfg.solver,
        offset=offset,
        ctx=ctx,
    )
    fit4 = step4.best
    dense = fit4.dense()

    degenerate = len(res) == 0

    if degenerate:
        log.warning("pipeline.empty_selection", mode=res.mode, eta=res.eta)

    model = OrdinalInteractionModel(
        cutpoints=fit4.cutpoints,
        main_coefs=fit1.dense() + dense[:p],
        interactions=tuple(
            (pair, float(dense[p + i]))
            for i, pair in enumerate(pairs)
            if dense[p + i] != 0.0
        ),
        std=std,
    )

    log.info(
        "pipeline.done",
        selected=len(res),
        interactions=len(model.interactions),
        lambda1=fit1.lambda_,
        lambda4=fit4.lambda_,
    )

    return OrdinalSprinterModel(
        model=model,
        step1=fit1,
        screen=res,
        step4=fit4,
        lambda1=fit1.lambda_,
        lambda4=fit4.lambda_,
        degenerate=degenerate,
        cfg=cfg,
    )


def evaluate_ordinal(
    model: "OrdinalSprinterModel | OrdinalInteractionModel | OrdinalFit",
    X: npt.ArrayLike,
    y: npt.ArrayLike,
) -> Evaluation:
    """
    Held-out deviance and the share of rows whose most likely category is
    the observed one.
    """
    prob = model.predict_proba(X)
    codes, _ = categories(y, prob.shape[1], require_all=False)
    dev = ordinal_deviance(prob, codes + 1)
    hits = prob.argmax(axis=1) == codes

    return Evaluation(
        deviance=dev,
        mean_deviance=dev / codes.shape[0],
        accuracy=float(hits.mean()),
    )
