"""
Population-level reference quantities for interaction screening.

For a random design X with products Z_j = X_a X_b and a response following
theta(X) = b0 + X' beta* + Z' gamma*, three population quantities describe
how much an interaction adds on top of the main effects:

    gamma_check_j  coefficient of Z_j in the joint fit of (1, X, Z_j)
    gamma_M_j      one dimensional fit of Z_j with the best main-effects fit
                   as offset
    cov_L_j        E[(Z_j - E_L(Z_j | X)) (Y - b'(X' beta_M))]

where E_L is the best linear predictor including an intercept. All three are
zero together. In the gaussian linear model they follow in closed form from
the moments Sigma = Cov(X), Psi = Cov(Z) and Phi = Cov(X, Z); otherwise they
are estimated by Monte Carlo with common random numbers.
"""

from dataclasses import dataclass
import math
import typing as t

import numpy as np
from numpy import typing as npt
from scipy import linalg

from sprinter import context, design, errors, logging
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.design import PairIndex, Pairs
from sprinter.families import Family, Kind, get_family

__all__ = (
    "Law",
    "PopulationSpec",
    "Moments",
    "LinearQuantities",
    "GlmQuantities",
    "EquivalenceVerdict",
    "ConvergenceReport",
    "population_moments",
    "linear_population_quantities",
    "glm_population_quantities",
    "vanishing_equivalence_check",
    "empirical_convergence_check",
    "top_h_containment",
)


FloatArray = npt.NDArray[np.float64]
Law = t.Literal["gaussian", "skewed"]

logger = logging.get_logger(__name__)

# 1 - Psi_jj^-1 Phi_j' Sigma^-1 Phi_j below this means Z_j is (nearly) a
# linear function of X
DENOMINATOR_FLOOR = 1e-10

# widest design accepted by the Monte Carlo GLM fits
MAX_GLM_P = 6


@dataclass(frozen=True, kw_only=True)
class PopulationSpec:
    family: Kind
    beta_star: FloatArray
    # (a, b, value) with a <= b
    gamma_star: t.Tuple[t.Tuple[int, int, float], ...] = ()
    intercept: float = 0.0
    law: Law = "gaussian"
    # None means zero mean and identity covariance
    mean: FloatArray | None = None
    cov: FloatArray | None = None
    # skewed law: X = mean + L (g + s (g^2 - 1)) / sqrt(1 + 2 s^2)
    skew: float = 0.5
    squares: bool = True
    # gaussian response noise
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if self.beta_star.ndim != 1:
            raise errors.DimensionError("beta_star must be a vector")

        for a, b, _ in self.gamma_star:
            self.pairs.flat(a, b)

        if self.cov is not None:
            try:
                linalg.cholesky(self.cov, lower=True)
            except linalg.LinAlgError as exc:
                raise errors.InputError(
                    "covariance must be positive definite"
                ) from exc

    @property
    def p(self) -> int:
        return int(self.beta_star.shape[0])

    @property
    def pairs(self) -> Pairs:
        return Pairs(self.p, squares=self.squares)

    @property
    def mu(self) -> FloatArray:
        return np.zeros(self.p) if self.mean is None else self.mean

    @property
    def sigma(self) -> FloatArray:
        return np.eye(self.p) if self.cov is None else self.cov

    @property
    def gamma_vector(self) -> FloatArray:
        pairs = self.pairs
        ret = np.zeros(pairs.q)

        for a, b, value in self.gamma_star:
            ret[pairs.flat(a, b)] += value

        return ret

    def sample(self, n: int, rng: np.random.Generator) -> FloatArray:
        L = linalg.cholesky(self.sigma, lower=True)
        g = rng.standard_normal((n, self.p))

        if self.law == "skewed":
            s = self.skew
            g = (g + s * (g * g - 1.0)) / math.sqrt(1.0 + 2.0 * s * s)

        return np.asfortranarray(self.mu + g @ L.T)

    def products(self, X: FloatArray) -> FloatArray:
        a, b = self.pairs.all

        return design.interaction_columns(X, a, b)

    def theta(self, X: FloatArray) -> FloatArray:
        theta = self.intercept + X @ self.beta_star

        for a, b, value in self.gamma_star:
            theta = theta + value * X[:, a] * X[:, b]

        return theta


@dataclass(frozen=True, kw_only=True)
class Moments:
    mu_x: FloatArray
    mu_z: FloatArray
    # Cov(X), p x p
    sigma: FloatArray
    # Cov(Z), q x q
    psi: FloatArray
    # Cov(X, Z), p x q
    phi: FloatArray
    exact: bool


def _isserlis(spec: PopulationSpec) -> Moments:
    """
    Moments of products of a gaussian vector with arbitrary mean.
    """
    m = spec.mu
    C = spec.sigma
    a, b = spec.pairs.all

    mu_z = C[a, b] + m[a] * m[b]

    # Cov(X_c, X_a X_b) = m_a C_bc + m_b C_ac
    phi = C[:, b] * m[a] + C[:, a] * m[b]

    Caa = C[np.ix_(a, a)]
    Cbb = C[np.ix_(b, b)]
    Cab = C[np.ix_(a, b)]
    Cba = C[np.ix_(b, a)]
    ma, mb = m[a], m[b]

    psi = (
        Caa * Cbb
        + Cab * Cba
        + np.outer(ma, ma) * Cbb
        + np.outer(ma, mb) * Cba
        + np.outer(mb, ma) * Cab
        + np.outer(mb, mb) * Caa
    )

    return Moments(mu_x=m, mu_z=mu_z, sigma=C, psi=psi, phi=phi, exact=True)


def population_moments(
    spec: PopulationSpec,
    mc_draws: int = 1_000_000,
    seed: int = 0,
) -> Moments:
    """
    Sigma, Psi and Phi of the population's design. Closed form for the gaussian
    law, Monte Carlo (seeded) for the skewed law.
    """
    if spec.law == "gaussian":
        return _isserlis(spec)

    rng = np.random.default_rng(seed)
    X = spec.sample(mc_draws, rng)
    Z = spec.products(X)

    mu_x = X.mean(axis=0)
    mu_z = Z.mean(axis=0)
    Xc = X - mu_x
    Zc = Z - mu_z

    return Moments(
        mu_x=mu_x,
        mu_z=mu_z,
        sigma=Xc.T @ Xc / mc_draws,
        psi=Zc.T @ Zc / mc_draws,
        phi=Xc.T @ Zc / mc_draws,
        exact=False,
    )


@dataclass(frozen=True, kw_only=True)
class LinearQuantities:
    beta_M: FloatArray
    gamma_M: FloatArray
    # from the (p + 1) dimensional normal equations of each pair
    gamma_check: FloatArray
    cov_L: FloatArray
    # 1 - Psi_jj^-1 Phi_j' Sigma^-1 Phi_j
    denominators: FloatArray
    # pairs whose denominator vanished, excluded from the identities
    degenerate: npt.NDArray[np.bool_]
    psi_diag: FloatArray

    def identity_residuals(self) -> t.Tuple[float, float]:
        """
        Largest violations of cov_L = Psi_jj gamma_M and of
        gamma_check = gamma_M / denominator over the usable pairs.
        """
        ok = ~self.degenerate

        cov = np.abs(self.cov_L - self.psi_diag * self.gamma_M)[ok]
        check = np.abs(
            self.gamma_check[ok] - self.gamma_M[ok] / self.denominators[ok]
        )

        return (
            float(np.max(cov, initial=0.0)),
            float(np.max(check, initial=0.0)),
        )


def linear_population_quantities(
    spec: PopulationSpec,
    moments: Moments | None = None,
) -> LinearQuantities:
    """
    Closed-form population quantities for the gaussian linear model.
    """
    if spec.family != "gaussian":
        raise errors.UsageError("closed forms exist for the gaussian family")

    mom = moments or population_moments(spec)
    gamma = spec.gamma_vector
    S, Phi, Psi = mom.sigma, mom.phi, mom.psi

    cho = linalg.cho_factor(S)
    S_inv_phi = linalg.cho_solve(cho, Phi)

    beta_M = spec.beta_star + S_inv_phi @ gamma
    cov_L = (Psi - Phi.T @ S_inv_phi) @ gamma

    psi_diag = np.diag(Psi).copy()
    explained = np.einsum("ij,ij->j", Phi, S_inv_phi)

    with np.errstate(divide="ignore", invalid="ignore"):
        gamma_M = np.where(psi_diag > 0.0, cov_L / psi_diag, 0.0)
        denominators = 1.0 - explained / psi_diag

    degenerate = ~(np.abs(denominators) > DENOMINATOR_FLOOR)

    if np.any(degenerate):
        bad = np.flatnonzero(degenerate)
        logger.warning(
            "oracle.condition_failed",
            pairs=[spec.pairs.pair(int(j)).as_tuple() for j in bad],
        )

    # joint normal equations of (X, Z_j) for every pair
    cov_xy = S @ spec.beta_star + Phi @ gamma
    cov_zy = Phi.T @ spec.beta_star + Psi @ gamma

    gamma_check = np.full(gamma.shape[0], np.nan)
    p = spec.p

    for j in np.flatnonzero(~degenerate):
        A = np.empty((p + 1, p + 1))
        A[:p, :p] = S
        A[:p, p] = Phi[:, j]
        A[p, :p] = Phi[:, j]
        A[p, p] = Psi[j, j]
        rhs = np.append(cov_xy, cov_zy[j])
        gamma_check[j] = linalg.solve(A, rhs, assume_a="sym")[p]

    return LinearQuantities(
        beta_M=beta_M,
        gamma_M=gamma_M,
        gamma_check=gamma_check,
        cov_L=cov_L,
        denominators=denominators,
        degenerate=degenerate,
        psi_diag=psi_diag,
    )


def _newton(
    family: Family,
    D: FloatArray,
    target: FloatArray,
    offset: FloatArray | None = None,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> FloatArray:
    """
    Minimize mean(b(eta) - eta * target), eta = offset + D coef, by Newton
    with step halving.
    """
    n, k = D.shape
    off = np.zeros(n) if offset is None else offset
    coef = np.zeros(k)
    coef[0] = float(family.link(family.null_mean(target))) - float(off.mean())

    def objective(c: FloatArray) -> float:
        return family.neg_loglik(off + D @ c, target)

    obj = objective(coef)

    for it in range(max_iter):
        eta = off + D @ coef
        score = D.T @ (target - family.mean(eta)) / n

        if float(np.max(np.abs(score))) < tol:
            return coef

        info = (D * family.variance(eta)[:, None]).T @ D / n

        try:
            step = linalg.solve(info, score, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise errors.NumericalError(
                f"population Newton: singular information at iteration {it}"
            ) from exc

        for _ in range(50):
            trial = coef + step
            new = objective(trial)

            if new <= obj + 1e-15 * abs(obj):
                break

            step = step / 2.0
        else:
            raise errors.NumericalError(
                f"population Newton: no descent at iteration {it}, "
                f"score {float(np.max(np.abs(score))):.3g}"
            )

        coef, obj = trial, new

    raise errors.NumericalError(
        f"population Newton did not converge in {max_iter} iterations"
    )


@dataclass(frozen=True, kw_only=True)
class GlmQuantities:
    pair: PairIndex
    gamma_M: float
    gamma_check: float
    cov_L: float
    # E[m_j Z_j^2]; cov_L = m_moment * gamma_M
    m_moment: float
    gamma_M_se: float
    gamma_check_se: float
    cov_L_se: float
    draws: int


def _glm_estimates(
    family: Family,
    spec: PopulationSpec,
    X: FloatArray,
    j: PairIndex,
) -> t.Tuple[float, float, float, float]:
    n = X.shape[0]
    # E l(theta, Y) is linear in Y, so Y can be replaced by its mean
    target = family.mean(spec.theta(X))
    z = X[:, j.a] * X[:, j.b]
    ones = np.ones((n, 1))
    D = np.hstack([ones, X])

    coef_M = _newton(family, D, target)
    eta_M = D @ coef_M

    gamma, failed = screening.solve_block(
        family, z.reshape(-1, 1), target, eta_M, bound=50.0, tol=1e-12
    )

    if failed[0]:
        raise errors.NumericalError(f"population gamma_M failed for {j}")

    gamma_M = float(gamma[0])
    gamma_check = float(_newton(family, np.hstack([D, z[:, None]]), target)[-1])

    # E_L(Z | X), intercept included
    proj, *_ = linalg.lstsq(D, z)
    cov_L = float(np.mean((z - D @ proj) * (target - family.mean(eta_M))))

    if gamma_M != 0.0:
        shift = family.mean(eta_M + z * gamma_M) - family.mean(eta_M)
        m_moment = float(np.mean(shift * z)) / gamma_M
    else:
        m_moment = float(np.mean(family.variance(eta_M) * z * z))

    return gamma_M, gamma_check, cov_L, m_moment


def glm_population_quantities(
    spec: PopulationSpec,
    pair: "PairIndex | t.Tuple[int, int]",
    mc_draws: int = 1_000_000,
    seed: int = 0,
    batches: int = 10,
    ctx: context.Context | None = None,
) -> GlmQuantities:
    """
    Monte Carlo population quantities for one pair.

    Each batch draws `mc_draws // batches` rows from its own child of
    `seed` and is solved on its own worker. The point estimates are solved
    once more on all batches stacked in batch order; standard errors come
    from the batch estimates.
    """
    ctx = context.ensure(ctx)
    family = get_family(spec.family)

    if not isinstance(pair, PairIndex):
        pair = spec.pairs.index([pair])[0]

    if spec.p > MAX_GLM_P:
        raise errors.UsageError(
            f"population fits are limited to p <= {MAX_GLM_P}, got {spec.p}"
        )

    if batches < 2:
        raise errors.UsageError(f"need at least 2 batches, got {batches}")

    size = mc_draws // batches

    # every batch fits 1 + p + 1 coefficients
    if size < 10 * (spec.p + 2):
        raise errors.UsageError(
            f"mc_draws={mc_draws} is too small for {batches} batches "
            f"at p={spec.p}"
        )

    def run(
        child: np.random.SeedSequence,
    ) -> t.Tuple[FloatArray, t.Tuple[float, float, float, float]]:
        X = spec.sample(size, np.random.Generator(np.random.PCG64(child)))

        return X, _glm_estimates(family, spec, X, pair)

    children = np.random.SeedSequence(seed).spawn(batches)
    done = ctx.map(run, children)

    ctx.maybe_stop()

    full = _glm_estimates(
        family, spec, np.vstack([X for X, _ in done]), pair
    )
    per_batch = np.array([est for _, est in done])
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(batches)

    return GlmQuantities(
        pair=pair,
        gamma_M=full[0],
        gamma_check=full[1],
        cov_L=full[2],
        m_moment=full[3],
        gamma_M_se=float(se[0]),
        gamma_check_se=float(se[1]),
        cov_L_se=float(se[2]),
        draws=size * batches,
    )


@dataclass(frozen=True, kw_only=True)
class EquivalenceVerdict:
    quantities: GlmQuantities
    # |value| <= z * se for gamma_check, gamma_M, cov_L
    zero: t.Tuple[bool, bool, bool]
    # all zero or all nonzero
    consistent: bool
    same_sign: bool


def vanishing_equivalence_check(
    spec: PopulationSpec,
    pair: "PairIndex | t.Tuple[int, int]",
    mc_draws: int = 1_000_000,
    seed: int = 0,
    z: float = 3.0,
    ctx: context.Context | None = None,
) -> EquivalenceVerdict:
    """
    Check that gamma_check, gamma_M and cov_L vanish together for a pair.
    """
    q = glm_population_quantities(
        spec, pair, mc_draws=mc_draws, seed=seed, ctx=ctx
    )

    values = (q.gamma_check, q.gamma_M, q.cov_L)
    ses = (q.gamma_check_se, q.gamma_M_se, q.cov_L_se)
    zero = tuple(abs(v) <= z * s for v, s in zip(values, ses))
    signs = {int(np.sign(v)) for v in values}

    return EquivalenceVerdict(
        quantities=q,
        zero=t.cast(t.Tuple[bool, bool, bool], zero),
        consistent=all(zero) or not any(zero),
        same_sign=len(signs) == 1,
    )


@dataclass(frozen=True, kw_only=True)
class ConvergenceReport:
    n_grid: t.Tuple[int, ...]
    # seed-averaged max_j |gamma_hat_j - gamma_M_j| per n
    errors: t.Tuple[float, ...]
    # log-log slope of errors against n
    slope: float
    # seed-averaged |{j: |gamma_hat_j| > eta0 n^-kappa}| per n
    sizes: t.Tuple[float, ...]
    kappa: float
    eta0: float
    seeds: int

    @property
    def sizes_monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.sizes, self.sizes[1:]))

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            "n_grid": list(self.n_grid),
            "errors": list(self.errors),
            "slope": self.slope,
            "sizes": list(self.sizes),
            "kappa": self.kappa,
            "eta0": self.eta0,
            "seeds": self.seeds,
        }

    def to_table(self) -> str:
        lines = [f"{'n':>8}  {'max error':>12}  {'selected':>10}"]

        for n, err, size in zip(self.n_grid, self.errors, self.sizes):
            lines.append(f"{n:>8}  {err:>12.6g}  {size:>10.2f}")

        lines.append(f"slope {self.slope:.4f} (kappa {self.kappa})")

        return "\n".join(lines)


def empirical_convergence_check(
    spec: PopulationSpec,
    n_grid: t.Sequence[int] = (500, 1000, 2000, 4000, 8000),
    seeds: int = 10,
    kappa: float = 0.25,
    eta0: float = 1.0,
    seed: int = 0,
    ctx: context.Context | None = None,
) -> ConvergenceReport:
    """
    Screen gaussian samples of increasing size with the population
    main-effects fit as offset and track how fast the empirical utilities
    approach gamma_M.

    Interaction columns are centered at their population means so that the
    one dimensional fit without intercept targets gamma_M.
    """
    ctx = context.ensure(ctx)

    if spec.family != "gaussian":
        raise errors.UsageError("the convergence check uses the gaussian model")

    mom = population_moments(spec)
    lin = linear_population_quantities(spec, mom)
    family = get_family("gaussian")

    mean_y = (
        spec.intercept
        + float(mom.mu_x @ spec.beta_star)
        + float(mom.mu_z @ spec.gamma_vector)
    )
    b0_M = mean_y - float(mom.mu_x @ lin.beta_M)

    root = np.random.SeedSequence(seed)
    errs: t.List[float] = []
    sizes: t.List[float] = []

    for n, seq in zip(n_grid, root.spawn(len(n_grid))):
        eta = eta0 * n ** (-kappa)

        def replicate(
            child: np.random.SeedSequence, n: int = n, eta: float = eta
        ) -> t.Tuple[float, float]:
            rng = np.random.Generator(np.random.PCG64(child))
            X = spec.sample(n, rng)
            y = spec.theta(X) + spec.noise_sd * rng.standard_normal(n)
            offset = b0_M + X @ lin.beta_M
            Z = spec.products(X) - mom.mu_z

            gamma, _ = screening.solve_block(family, Z, y, offset)

            return (
                float(np.max(np.abs(gamma - lin.gamma_M))),
                float(np.sum(np.abs(gamma) > eta)),
            )

        # seed order, whatever the scheduling
        e_n, s_n = np.array(ctx.map(replicate, seq.spawn(seeds))).T

        errs.append(float(np.mean(e_n)))
        sizes.append(float(np.mean(s_n)))

        logger.debug("oracle.convergence", n=n, error=errs[-1], size=sizes[-1])

    slope = float(np.polyfit(np.log(n_grid), np.log(errs), 1)[0])

    return ConvergenceReport(
        n_grid=tuple(int(n) for n in n_grid),
        errors=tuple(errs),
        slope=slope,
        sizes=tuple(sizes),
        kappa=kappa,
        eta0=eta0,
        seeds=seeds,
    )


def _top(values: npt.ArrayLike, k: int) -> t.Set[int]:
    values = np.abs(np.asarray(values, dtype=np.float64))
    # |value| descending, smaller index first on ties
    order = np.lexsort((np.arange(values.shape[0]), -values))

    return {int(j) for j in order[:k]}


def top_h_containment(
    population: npt.ArrayLike,
    empirical: npt.ArrayLike,
    h: int,
    m: int,
) -> bool:
    """
    Whether the top-h pairs by population |gamma_M| are all among the top-m
    pairs by empirical |gamma_hat|.
    """
    if h > m:
        raise errors.UsageError(f"h={h} must not exceed m={m}")

    return _top(population, h) <= _top(empirical, m)
