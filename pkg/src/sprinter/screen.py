"""
Interaction screening.

Every candidate interaction z_j = x_a * x_b gets a one dimensional fit

    gamma_j = argmin_g  mean_i l(offset_i + z_ij * g, y_i)

where the offset carries the main-effects fit. Candidates are scanned once, in
blocks of columns, and either the top-m by |gamma_j| or every |gamma_j| above
a threshold is kept.

Interaction columns are built from the standardized main effects but are not
standardized themselves, so the ranking depends on the spread of z_j.
"""

from dataclasses import dataclass
import heapq
import math
import typing as t

import numpy as np
from numpy import typing as npt

from sprinter import context, core, design, errors, logging
from sprinter.config import ScreenConfig
from sprinter.design import PairIndex, Pairs
from sprinter.families import Family

__all__ = (
    "ScreenResult",
    "Mode",
    "default_m",
    "fit_1d_offset_mle",
    "solve_block",
    "compute_gammas",
    "block_kernel",
    "Kernel",
    "screen",
)


FloatArray = npt.NDArray[np.float64]
Mode = t.Literal["top_m", "threshold"]

logger = logging.get_logger(__name__)


@dataclass(frozen=True, kw_only=True)
class ScreenResult:
    # (pair, gamma) sorted by |gamma| descending, ties by flat index
    selected: t.Tuple[t.Tuple[PairIndex, float], ...]
    mode: Mode
    m: int | None
    eta: float | None
    n_scanned: int
    newton_failures: int
    squares: bool = True

    def __len__(self) -> int:
        return len(self.selected)

    @property
    def pairs(self) -> t.List[PairIndex]:
        return [pair for pair, _ in self.selected]

    @property
    def gammas(self) -> FloatArray:
        return np.array([gamma for _, gamma in self.selected], dtype=np.float64)


def default_m(n: int) -> int:
    """
    floor(n / log n), at least 1.
    """
    if n < 2:
        raise errors.UsageError(f"default m needs n >= 2, got {n}")

    return max(1, math.floor(n / math.log(n)))


def _newton(
    family: Family,
    Z: FloatArray,
    y: FloatArray,
    offset: FloatArray,
    bound: float,
    max_iter: int,
    tol: float,
) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
    """
    Bracketed Newton on the score of every column at once. A step leaving the
    current bracket is replaced by its midpoint.
    """
    n, width = Z.shape
    gamma = np.zeros(width)
    lo = np.full(width, -bound)
    hi = np.full(width, bound)
    done = np.zeros(width, dtype=bool)
    resid = y[:, None]

    for _ in range(max_iter):
        act = np.flatnonzero(~done)

        if act.size == 0:
            break

        Za = Z[:, act]
        g = gamma[act]
        theta = offset[:, None] + Za * g
        score = np.einsum("ij,ij->j", Za, resid - family.mean(theta))
        info = np.einsum("ij,ij->j", Za * Za, family.variance(theta))

        converged = np.abs(score) / n < tol
        # root pinned against the bound
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


def _newton_intercept(
    family: Family,
    Z: FloatArray,
    y: FloatArray,
    offset: FloatArray,
    bound: float,
    max_iter: int,
    tol: float,
) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
    """
    Damped two parameter Newton for (b0, gamma) per column with backtracking
    on the objective.
    """
    n, width = Z.shape
    start = float(family.link(family.null_mean(y))) - float(np.mean(offset))
    b0 = np.full(width, start)
    gamma = np.zeros(width)
    done = np.zeros(width, dtype=bool)
    resid = y[:, None]

    def objective(theta: FloatArray) -> FloatArray:
        return np.mean(family.cumulant(theta) - theta * resid, axis=0)

    for _ in range(max_iter):
        act = np.flatnonzero(~done)

        if act.size == 0:
            break

        Za = Z[:, act]
        theta = offset[:, None] + b0[act] + Za * gamma[act]
        r = resid - family.mean(theta)
        v = family.variance(theta)

        s0 = r.sum(axis=0)
        s1 = np.einsum("ij,ij->j", Za, r)

        converged = np.maximum(np.abs(s0), np.abs(s1)) / n < tol
        done[act[converged]] = True

        h00 = v.sum(axis=0)
        h01 = np.einsum("ij,ij->j", Za, v)
        h11 = np.einsum("ij,ij->j", Za * Za, v)
        det = h00 * h11 - h01 * h01

        with np.errstate(divide="ignore", invalid="ignore"):
            d0 = (h11 * s0 - h01 * s1) / det
            d1 = (h00 * s1 - h01 * s0) / det

        d0 = np.where(np.isfinite(d0), d0, 0.0)
        d1 = np.where(np.isfinite(d1), d1, 0.0)

        base = objective(theta)
        t_ = np.ones(act.size)

        for _ in range(30):
            g_new = np.clip(gamma[act] + t_ * d1, -bound, bound)
            theta_new = offset[:, None] + (b0[act] + t_ * d0) + Za * g_new
            worse = objective(theta_new) > base + 1e-14 * np.abs(base)

            if not np.any(worse):
                break

            t_ = np.where(worse, t_ / 2.0, t_)

        upd = ~converged
        b0[act[upd]] += (t_ * d0)[upd]
        gamma[act[upd]] = np.clip(gamma[act] + t_ * d1, -bound, bound)[upd]

    return gamma, ~done


def solve_block(
    family: Family,
    Z: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    bound: float = 50.0,
    max_iter: int = 100,
    tol: float = 1e-8,
    intercept: bool = False,
) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
    """
    One dimensional MLEs for every column of `Z`.

    Returns `(gamma, failed)`. With `intercept=True` each column also gets its
    own intercept (the marginal fit used by SIS) and only gamma is returned.
    Columns that are identically zero, or constant when fitting an intercept,
    get gamma = 0.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, width = Z.shape
    offset = (
        np.zeros(n) if offset is None else np.asarray(offset, dtype=np.float64)
    )

    gamma = np.zeros(width)
    failed = np.zeros(width, dtype=bool)

    if intercept:
        spread = Z.std(axis=0)
        live = spread > 1e-12 * (1.0 + np.abs(Z.mean(axis=0)))
    else:
        live = np.any(Z != 0.0, axis=0)

    cols = np.flatnonzero(live)

    if cols.size == 0:
        return gamma, failed

    Zl = Z[:, cols]

    if family.kind == "gaussian":
        r = y - offset

        if intercept:
            Zc = Zl - Zl.mean(axis=0)
            g = (Zc.T @ (r - r.mean())) / np.einsum("ij,ij->j", Zc, Zc)
        else:
            g = (Zl.T @ r) / np.einsum("ij,ij->j", Zl, Zl)

        gamma[cols] = np.clip(g, -bound, bound)

        return gamma, failed

    solve = _newton_intercept if intercept else _newton
    g, bad = solve(family, Zl, y, offset, bound, max_iter, tol)
    gamma[cols] = g
    failed[cols] = bad

    return gamma, failed


def fit_1d_offset_mle(
    family: Family,
    z: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike,
    bound: float = 50.0,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> float:
    """
    argmin over g of mean_i l(offset_i + z_i g, y_i), confined to
    [-bound, bound].
    """
    z = np.asarray(z, dtype=np.float64)
    gamma, failed = solve_block(
        family,
        z.reshape(-1, 1),
        y,
        offset,
        bound=bound,
        max_iter=max_iter,
        tol=tol,
    )

    if failed[0]:
        logger.warning("screen.newton_failed", family=family.kind)

    return float(gamma[0])


# one dimensional fits for a block of interaction columns: gamma and failures
Kernel = t.Callable[[FloatArray], t.Tuple[FloatArray, npt.NDArray[np.bool_]]]


def block_kernel(
    family: Family,
    y: FloatArray,
    offset: FloatArray,
    cfg: ScreenConfig,
    intercept: bool = False,
) -> Kernel:
    """
    The GLM kernel: `solve_block` with the response and offset bound.
    """

    def kernel(Z: FloatArray) -> t.Tuple[FloatArray, npt.NDArray[np.bool_]]:
        return solve_block(
            family,
            Z,
            y,
            offset,
            bound=cfg.bound,
            max_iter=cfg.max_iter,
            tol=cfg.tol,
            intercept=intercept,
        )

    return kernel


def _block_width(n: int, cfg: ScreenConfig) -> int:
    return max(1, cfg.block_elements // max(n, 1))


def _scan(
    Xs: FloatArray,
    kernel: Kernel,
    pairs: Pairs,
    lo: int,
    hi: int,
    cfg: ScreenConfig,
    ctx: context.Context,
) -> t.Iterator[t.Tuple[int, FloatArray, int]]:
    """
    Yield `(start, gammas, failures)` per block of the flat range [lo, hi).
    Only one block of columns is held at a time.
    """
    n = Xs.shape[0]
    width = _block_width(n, cfg)
    buf = np.empty((n, min(width, hi - lo)), order="F")

    for start in range(lo, hi, width):
        ctx.maybe_stop()

        stop = min(start + width, hi)
        a, b = pairs.arrays(start, stop)
        Z = design.interaction_columns(Xs, a, b, out=buf[:, : stop - start])
        gamma, failed = kernel(Z)

        yield start, gamma, int(failed.sum())


def _prepare(
    family: Family | None,
    Xs: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None,
) -> t.Tuple[FloatArray, FloatArray, FloatArray]:
    Xs = design.check_matrix(Xs)
    n = Xs.shape[0]

    if family is None:
        y = np.asarray(y, dtype=np.float64)
    else:
        y = family.validate_response(y)

    if y.shape != (n,):
        raise errors.DimensionError(f"X has {n} rows, y has shape {y.shape}")

    if offset is None:
        off = np.zeros(n)
    else:
        off = np.asarray(offset, dtype=np.float64)

        if off.shape != (n,):
            raise errors.DimensionError(
                f"offset has shape {off.shape}, expected ({n},)"
            )

    return Xs, y, off


def compute_gammas(
    family: Family,
    Xs: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    cfg: ScreenConfig | None = None,
    intercept: bool = False,
) -> t.Tuple[FloatArray, int]:
    """
    Every one of the q utilities, in flat order, and the number of Newton
    failures. Holds q floats, so only suitable for moderate p.
    """
    cfg = cfg or ScreenConfig()
    Xs, y, off = _prepare(family, Xs, y, offset)
    pairs = Pairs(Xs.shape[1], squares=cfg.squares)
    kernel = block_kernel(family, y, off, cfg, intercept)

    ret = np.empty(pairs.q)
    failures = 0

    for start, gamma, failed in _scan(
        Xs, kernel, pairs, 0, pairs.q, cfg, context.default()
    ):
        ret[start : start + gamma.shape[0]] = gamma
        failures += failed

    return ret, failures


# (|gamma|, -flat, gamma): the heap minimum is the weakest candidate, the
# larger flat index losing ties
Entry = t.Tuple[float, int, float]


def _scan_top_m(
    Xs: FloatArray,
    kernel: Kernel,
    pairs: Pairs,
    bounds: t.Tuple[int, int],
    m: int,
    cfg: ScreenConfig,
    ctx: context.Context,
) -> t.Tuple[t.List[Entry], int]:
    lo, hi = bounds
    heap: t.List[Entry] = []
    failures = 0

    for start, gamma, failed in _scan(Xs, kernel, pairs, lo, hi, cfg, ctx):
        failures += failed
        mag = np.abs(gamma)

        if len(heap) >= m:
            # flat indices only grow within a range, so an equal |gamma| never
            # displaces an entry already held
            keep = np.flatnonzero(mag > heap[0][0])
        else:
            keep = np.arange(gamma.shape[0])

        for i in keep:
            entry = (float(mag[i]), -(start + int(i)), float(gamma[i]))

            if len(heap) < m:
                heapq.heappush(heap, entry)
            elif entry[0] > heap[0][0]:
                heapq.heapreplace(heap, entry)

    return heap, failures


def _scan_threshold(
    Xs: FloatArray,
    kernel: Kernel,
    pairs: Pairs,
    bounds: t.Tuple[int, int],
    eta: float,
    cfg: ScreenConfig,
    ctx: context.Context,
) -> t.Tuple[t.List[Entry], int]:
    lo, hi = bounds
    ret: t.List[Entry] = []
    failures = 0

    for start, gamma, failed in _scan(Xs, kernel, pairs, lo, hi, cfg, ctx):
        failures += failed

        for i in np.flatnonzero(np.abs(gamma) > eta):
            g = float(gamma[i])
            ret.append((abs(g), -(start + int(i)), g))

    return ret, failures


def screen(
    family: Family | None,
    Xs: npt.ArrayLike,
    y: npt.ArrayLike,
    offset: npt.ArrayLike | None = None,
    m: int | None = None,
    eta: float | None = None,
    cfg: ScreenConfig | None = None,
    ctx: context.Context | None = None,
    intercept: bool = False,
    kernel: Kernel | None = None,
) -> ScreenResult:
    """
    Scan every candidate interaction of the standardized main effects `Xs`
    once and keep the strongest.

    :param m: Keep the top-m by |gamma|. Defaults to `cfg.m`, then to
        `default_m(n)`.
    :param eta: Keep every |gamma| > eta instead. Takes precedence over `m`.
    :param intercept: Fit a private intercept per candidate instead of
        relying on the offset (marginal screening).
    :param kernel: Replaces the GLM one dimensional fit, `family` may then be
        None.

    The result does not depend on the number of workers in `ctx`.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or ScreenConfig()
    Xs, y, off = _prepare(family, Xs, y, offset)
    n, p = Xs.shape
    pairs = Pairs(p, squares=cfg.squares)

    if kernel is None:
        if family is None:
            raise errors.UsageError("screening needs a family or a kernel")

        kernel = block_kernel(family, y, off, cfg, intercept)

    eta = cfg.eta if eta is None else eta
    mode: Mode

    if eta is not None:
        if not eta >= 0.0:
            raise errors.UsageError(f"eta must be non-negative, got {eta}")

        mode = "threshold"
        m = None
    else:
        mode = "top_m"
        m = cfg.m if m is None else m
        m = default_m(n) if m is None else m

        if m < 1:
            raise errors.UsageError(f"m must be at least 1, got {m}")

        if m > pairs.q:
            logger.warning("screen.m_clamped", m=m, q=pairs.q)
            m = pairs.q

    parts = 1 if ctx.workers <= 1 else ctx.workers * 4
    chunks = core.chunk_ranges(pairs.q, parts)

    log = logger.bind(
        family=None if family is None else family.kind,
        mode=mode,
        q=pairs.q,
    )
    log.debug("screen.start", chunks=len(chunks), workers=ctx.workers)

    def run(bounds: t.Tuple[int, int]) -> t.Tuple[t.List[Entry], int]:
        assert kernel is not None

        if mode == "threshold":
            return _scan_threshold(
                Xs, kernel, pairs, bounds, t.cast(float, eta), cfg, ctx
            )

        return _scan_top_m(Xs, kernel, pairs, bounds, t.cast(int, m), cfg, ctx)

    results = ctx.map(run, chunks)

    merged = [entry for entries, _ in results for entry in entries]
    merged.sort(key=lambda entry: (-entry[0], -entry[1]))

    if m is not None:
        merged = merged[:m]

    failures = sum(failed for _, failed in results)

    if failures:
        log.warning("screen.newton_failures", count=failures)

    selected = tuple(
        (pairs.pair(-neg_flat), gamma) for (_, neg_flat, gamma) in merged
    )

    log.debug("screen.done", selected=len(selected), failures=failures)

    return ScreenResult(
        selected=selected,
        mode=mode,
        m=m,
        eta=eta if mode == "threshold" else None,
        n_scanned=pairs.q,
        newton_failures=failures,
        squares=cfg.squares,
    )
