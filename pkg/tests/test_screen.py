import numpy as np
import pytest
from scipy import optimize

from sprinter import context, design, errors, penalized, simulate
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import ScreenConfig, SolverConfig
from sprinter.design import Pairs
from sprinter.families import get_family

gaussian = get_family("gaussian")
binomial = get_family("binomial")


@pytest.mark.parametrize("n,m", [(100, 21), (3, 2), (2, 2), (1000, 144)])
def test_default_m(n, m):
    assert screening.default_m(n) == m


def test_default_m_needs_two_rows():
    with pytest.raises(errors.UsageError):
        screening.default_m(1)


def test_residual_orthogonal_to_everything(rng):
    z = rng.standard_normal(30)
    offset = rng.standard_normal(30)

    assert screening.fit_1d_offset_mle(
        gaussian, z, offset, offset
    ) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_closed_form(rng):
    z = rng.standard_normal(30)

    assert screening.fit_1d_offset_mle(
        gaussian, z, 2.0 * z, np.zeros(30)
    ) == pytest.approx(2.0)


def test_binomial_matches_direct_minimization():
    z = np.array([1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 1.5, -1.5])
    y = np.array([1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0])
    offset = np.array([0.1, -0.2, 0.3, 0.0, -0.1, 0.2, -0.3, 0.05])

    gamma = screening.fit_1d_offset_mle(binomial, z, y, offset, tol=1e-12)
    best = optimize.minimize_scalar(
        lambda g: binomial.neg_loglik(offset + z * g, y),
        bracket=(-5.0, 0.0, 5.0),
        method="golden",
        tol=1e-10,
    )

    assert gamma == pytest.approx(best.x, abs=1e-5)


def test_solve_block_handles_zero_columns(rng):
    Z = rng.standard_normal((20, 3))
    Z[:, 1] = 0.0
    y = rng.binomial(1, 0.5, size=20).astype(float)

    gamma, failed = screening.solve_block(binomial, Z, y)

    assert gamma[1] == 0.0
    assert not failed.any()


def test_solve_block_marginal_slope(rng):
    Z = rng.normal(loc=2.0, size=(40, 2))
    y = 3.0 + Z[:, 0] + rng.standard_normal(40)

    gamma, _ = screening.solve_block(gaussian, Z, y, intercept=True)
    slopes = [np.polyfit(Z[:, k], y, 1)[0] for k in range(2)]

    np.testing.assert_allclose(gamma, slopes)


def test_marginal_utility_is_correlation_up_to_scale(rng):
    Z = rng.standard_normal((60, 4)) * [1.0, 2.0, 0.5, 3.0]
    y = Z[:, 1] - Z[:, 3] + rng.standard_normal(60)

    gamma, _ = screening.solve_block(gaussian, Z, y, intercept=True)
    corr = [np.corrcoef(Z[:, k], y)[0, 1] for k in range(4)]

    np.testing.assert_allclose(gamma * Z.std(axis=0) / y.std(), corr)


def test_block_kernel_wraps_solve_block(rng):
    Z = rng.standard_normal((25, 5))
    y = rng.poisson(2.0, size=25).astype(float)
    offset = np.full(25, 0.5)
    poisson = get_family("poisson")
    cfg = ScreenConfig()

    kernel = screening.block_kernel(poisson, y, offset, cfg)

    np.testing.assert_array_equal(
        kernel(Z)[0], screening.solve_block(poisson, Z, y, offset)[0]
    )


@pytest.fixture
def noisy(rng):
    X = rng.standard_normal((50, 10))
    Xs, _ = design.standardize(X)
    y = X[:, 0] + 3.0 * X[:, 2] * X[:, 5] + rng.standard_normal(50)
    offset = 0.8 * X[:, 0]

    return Xs, y, offset


def _reference(gamma: np.ndarray, m: int) -> list:
    order = sorted(range(gamma.shape[0]), key=lambda j: (-abs(gamma[j]), j))

    return order[:m]


def test_top_m_matches_exhaustive_sort(noisy):
    Xs, y, offset = noisy
    gamma, failures = screening.compute_gammas(gaussian, Xs, y, offset)

    res = screening.screen(gaussian, Xs, y, offset, m=5)

    assert failures == 0
    assert [pair.flat for pair in res.pairs] == _reference(gamma, 5)
    np.testing.assert_allclose(res.gammas, gamma[_reference(gamma, 5)])
    assert res.mode == "top_m"
    assert res.n_scanned == 55


def test_m_equal_to_q_returns_everything_sorted(noisy):
    Xs, y, offset = noisy
    gamma, _ = screening.compute_gammas(gaussian, Xs, y, offset)

    res = screening.screen(gaussian, Xs, y, offset, m=55)

    assert len(res) == 55
    assert [pair.flat for pair in res.pairs] == _reference(gamma, 55)


def test_m_above_q_is_clamped(noisy):
    Xs, y, offset = noisy

    assert len(screening.screen(gaussian, Xs, y, offset, m=1000)) == 55


def test_default_m_from_rows(noisy):
    Xs, y, offset = noisy

    res = screening.screen(gaussian, Xs, y, offset)

    assert res.m == screening.default_m(50)
    assert len(res) == res.m


def test_result_independent_of_workers_and_blocks(noisy):
    Xs, y, offset = noisy
    cfg = ScreenConfig(block_elements=150)

    one = screening.screen(gaussian, Xs, y, offset, m=7)
    many = screening.screen(
        gaussian, Xs, y, offset, m=7, cfg=cfg, ctx=context.default(workers=4)
    )

    assert one.pairs == many.pairs
    np.testing.assert_allclose(one.gammas, many.gammas, rtol=1e-12)


def test_threshold_mode(noisy):
    Xs, y, offset = noisy
    gamma, _ = screening.compute_gammas(gaussian, Xs, y, offset)
    eta = float(np.median(np.abs(gamma)))

    res = screening.screen(gaussian, Xs, y, offset, eta=eta)

    assert res.mode == "threshold"
    assert res.m is None
    assert {pair.flat for pair in res.pairs} == set(
        np.flatnonzero(np.abs(gamma) > eta).tolist()
    )
    assert np.all(np.diff(np.abs(res.gammas)) <= 0.0)


def test_huge_threshold_selects_nothing(noisy):
    Xs, y, offset = noisy

    res = screening.screen(gaussian, Xs, y, offset, eta=1e9)

    assert len(res) == 0
    assert res.eta == 1e9


def test_threshold_from_config_wins_over_m(noisy):
    Xs, y, offset = noisy
    cfg = ScreenConfig(m=3, eta=1e9)

    res = screening.screen(gaussian, Xs, y, offset, cfg=cfg)

    assert res.mode == "threshold"


def test_without_squares(noisy):
    Xs, y, offset = noisy
    cfg = ScreenConfig(squares=False)

    res = screening.screen(gaussian, Xs, y, offset, m=45, cfg=cfg)

    assert res.n_scanned == 45
    assert all(pair.a < pair.b for pair in res.pairs)
    assert res.squares is False


def test_planted_pair_ranks_first(noisy):
    Xs, y, offset = noisy

    res = screening.screen(gaussian, Xs, y, offset, m=3)

    assert res.pairs[0].as_tuple() == (2, 5)


def test_custom_kernel(noisy):
    Xs, y, _ = noisy
    pairs = Pairs(Xs.shape[1])

    def kernel(Z):
        return Z.sum(axis=0), np.zeros(Z.shape[1], dtype=bool)

    res = screening.screen(None, Xs, y, m=2, kernel=kernel)
    a, b = pairs.all
    sums = (Xs[:, a] * Xs[:, b]).sum(axis=0)

    assert [pair.flat for pair in res.pairs] == _reference(sums, 2)


def test_bad_arguments(noisy):
    Xs, y, offset = noisy

    with pytest.raises(errors.UsageError):
        screening.screen(None, Xs, y)

    with pytest.raises(errors.UsageError):
        screening.screen(gaussian, Xs, y, eta=-1.0)

    with pytest.raises(errors.UsageError):
        screening.screen(gaussian, Xs, y, m=0)

    with pytest.raises(errors.DimensionError):
        screening.screen(gaussian, Xs, y, offset[:10])


def _sum_kernel(Z):
    return Z.sum(axis=0), np.zeros(Z.shape[1], dtype=bool)


@pytest.mark.parametrize("seed", range(200))
def test_random_top_m_with_ties_matches_sort(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 12))
    p = int(rng.integers(2, 31))
    squares = bool(seed % 2)
    pairs = Pairs(p, squares=squares)
    m = int(rng.integers(1, pairs.q + 1))
    # small integers make many interaction sums tie exactly
    X = rng.integers(-2, 3, size=(n, p)).astype(float)
    a, b = pairs.all
    sums = (X[:, a] * X[:, b]).sum(axis=0)
    expected = _reference(sums, m)
    block = int(rng.integers(1, 4)) * n

    for workers in (1, 2, 8):
        res = screening.screen(
            None,
            X,
            np.zeros(n),
            m=m,
            kernel=_sum_kernel,
            cfg=ScreenConfig(squares=squares, block_elements=block),
            ctx=context.default(workers=workers),
        )

        assert [pair.flat for pair in res.pairs] == expected
        np.testing.assert_array_equal(res.gammas, sums[expected])


@pytest.mark.parametrize("seed", range(20))
def test_random_gaussian_top_m_matches_sort(seed):
    rng = np.random.default_rng(1000 + seed)
    n, p = 40, int(rng.integers(2, 31))
    Xs, _ = design.standardize(rng.standard_normal((n, p)))
    y = rng.standard_normal(n)
    offset = 0.3 * rng.standard_normal(n)
    gamma, _ = screening.compute_gammas(gaussian, Xs, y, offset)
    m = int(rng.integers(1, gamma.shape[0] + 1))

    for workers in (1, 2, 8):
        res = screening.screen(
            gaussian,
            Xs,
            y,
            offset,
            m=m,
            cfg=ScreenConfig(block_elements=3 * n),
            ctx=context.default(workers=workers),
        )

        assert [pair.flat for pair in res.pairs] == _reference(gamma, m)


FAMILIES = [binomial, get_family("poisson"), gaussian]


@pytest.mark.parametrize("seed", range(500))
def test_random_1d_fits_match_golden_section(seed):
    rng = np.random.default_rng(seed)
    family = FAMILIES[seed % 3]
    n = int(rng.integers(30, 81))
    z = rng.standard_normal(n)
    offset = rng.normal(0.0, 0.5, n)
    theta = offset + z * rng.uniform(-1.0, 1.0)

    match family.kind:
        case "binomial":
            y = rng.binomial(1, 1.0 / (1.0 + np.exp(-theta))).astype(float)
        case "poisson":
            y = rng.poisson(np.exp(theta)).astype(float)
        case _:
            y = theta + rng.standard_normal(n)

    gamma = screening.fit_1d_offset_mle(family, z, y, offset, tol=1e-12)
    best = optimize.minimize_scalar(
        lambda g: family.neg_loglik(offset + z * g, y),
        bracket=(-1.0, 1.0),
        method="golden",
        tol=1e-10,
    )

    assert gamma == pytest.approx(best.x, abs=1e-5)

    if family.kind == "gaussian":
        closed = z @ (y - offset) / (z @ z)

        assert gamma == pytest.approx(closed, rel=1e-12)


@pytest.mark.slow
def test_anti_hierarchical_pairs_survive_screening():
    n, p = 2000, 50
    m = screening.default_m(n)
    ctx = context.default()
    hits = 0

    for seed in range(50):
        sim = simulate.SimDesign(
            family="binomial",
            n=n,
            p=p,
            structure="anti_hierarchical",
            beta_value=1.0,
            gamma_value=4.0,
            seed=seed,
        )
        train, _ = simulate.simulate(sim)
        X, y = train.X, train.y
        fit = penalized.cv_fit(
            binomial, X, y, cfg=SolverConfig(tol=1e-8), ctx=ctx
        ).best

        if fit.converged:
            assert penalized.kkt_residual(fit, X, y) <= 1e-6

        Xs, _ = design.standardize(X)
        res = screening.screen(
            binomial, Xs, y, fit.linear_predictor(X), m=m, ctx=ctx
        )
        found = {pair.as_tuple() for pair in res.pairs}
        hits += set(sim.interactions) <= found

    assert m == 263
    assert hits >= 48
