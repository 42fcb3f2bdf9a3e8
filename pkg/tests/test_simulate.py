import numpy as np
import pytest

from sprinter import errors, simulate
from sprinter.design import Dataset, Pairs
from sprinter.families import get_family
from sprinter.pipeline import InteractionModel
from sprinter.simulate import OrdinalDesign, SimDesign


def test_structure_sets_logistic_mixed():
    main, pairs = simulate.structure_sets("binomial", "mixed")
    one_based = [(a + 1, b + 1) for a, b in pairs]

    assert main == (0, 1, 2)
    assert one_based == [(1, 4), (2, 5), (6, 7), (8, 9), (10, 11)]


def test_structure_sets_poisson_anti():
    main, pairs = simulate.structure_sets("poisson", "anti")
    one_based = [(a + 1, b + 1) for a, b in pairs]

    assert main == (0, 1)
    assert one_based == [(3, 4), (5, 6), (7, 8)]
    assert set(main).isdisjoint({k for pair in pairs for k in pair})


@pytest.mark.parametrize("kind", ["gaussian", "binomial", "poisson"])
def test_every_structure_is_available(kind):
    structures = simulate.Structure.__args__

    assert structures == ("mixed", "hierarchical", "anti_hierarchical")

    for structure in structures:
        main, pairs = simulate.structure_sets(kind, structure)

        assert main and pairs

    hierarchical = simulate.structure_sets(kind, "hierarchical")
    anti = simulate.structure_sets(kind, "anti_hierarchical")

    assert {k for pair in hierarchical[1] for k in pair} & set(hierarchical[0])
    assert set(anti[0]).isdisjoint({k for pair in anti[1] for k in pair})


def test_unknown_structure():
    with pytest.raises(errors.UsageError):
        simulate.structure_sets("gaussian", "ring")


def test_simulate_shapes_and_determinism():
    design = SimDesign(family="binomial", n=100, p=150, seed=3)

    train, held = simulate.simulate(design)
    again, _ = simulate.simulate(design)

    assert train.X.shape == (100, 150)
    assert held.X.shape == (100, 150)
    assert set(np.unique(train.y)) <= {0.0, 1.0}
    assert train.names[0] == "x1"
    np.testing.assert_array_equal(train.X, again.X)
    np.testing.assert_array_equal(train.y, again.y)
    assert not np.array_equal(train.X, held.X[:100])


def test_theta_follows_planted_structure():
    design = SimDesign(family="gaussian", n=50, p=12, seed=1, n_eval=10)
    train, _ = simulate.simulate(design)
    X = train.X

    expected = (
        X[:, 0] + X[:, 1] + X[:, 2]
        + 4.0 * (X[:, 0] * X[:, 3] + X[:, 1] * X[:, 4] + X[:, 5] * X[:, 6]
                 + X[:, 7] * X[:, 8] + X[:, 9] * X[:, 10])
    )  # fmt: skip

    np.testing.assert_allclose(train.theta, expected)


def test_poisson_uses_half_variance():
    design = SimDesign(
        family="poisson", n=4000, p=9, beta_value=0.0, gamma_value=0.0
    )
    train, _ = simulate.simulate(design)

    assert design.resolved_x_variance == 0.5
    assert train.X.var() == pytest.approx(0.5, rel=0.05)
    assert np.all(train.y >= 0.0)


def test_null_binomial_is_balanced():
    design = SimDesign(
        family="binomial", n=4000, p=12, beta_value=0.0, gamma_value=0.0
    )
    train, _ = simulate.simulate(design)
    se = np.sqrt(0.25 / 4000)

    assert abs(train.y.mean() - 0.5) < 4.0 * se


def test_design_needs_room_for_structure():
    with pytest.raises(errors.UsageError):
        SimDesign(family="binomial", n=100, p=10)

    with pytest.raises(errors.UsageError):
        SimDesign(family="gaussian", n=0, p=20)


def test_main_interaction_ratio():
    design = SimDesign(family="gaussian", n=10, p=12, gamma_value=0.0)

    assert simulate.main_interaction_ratio(design, np.ones((4, 12))) == np.inf

    design = SimDesign(family="gaussian", n=10, p=12)

    # three main effects against five products with coefficient 4
    assert simulate.main_interaction_ratio(
        design, np.ones((4, 12))
    ) == pytest.approx(9.0 / 400.0)


@pytest.mark.parametrize(
    "scores,labels,expected",
    [
        ([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 1.0),
        ([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1], 0.0),
        ([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], 0.75),
        ([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1], 0.5),
    ],
)
def test_auc(scores, labels, expected):
    assert simulate.auc(scores, labels) == pytest.approx(expected)


def test_auc_errors():
    with pytest.raises(errors.InputError):
        simulate.auc([0.1, 0.2], [1, 1])

    with pytest.raises(errors.InputError):
        simulate.auc([0.1, 0.2], [0, 2])

    with pytest.raises(errors.DimensionError):
        simulate.auc([0.1, 0.2, 0.3], [0, 1])


def _oracle(design: SimDesign) -> InteractionModel:
    beta = np.zeros(design.p)
    beta[list(design.main_effects)] = design.beta_value
    index = Pairs(design.p).index(design.interactions)

    return InteractionModel(
        family=get_family(design.family),
        intercept=0.0,
        main_coefs=beta,
        interactions=tuple((pair, design.gamma_value) for pair in index),
    )


def _null(design: SimDesign) -> InteractionModel:
    return InteractionModel(
        family=get_family(design.family),
        intercept=0.0,
        main_coefs=np.zeros(design.p),
    )


def test_evaluate_gaussian_has_no_auc():
    design = SimDesign(family="gaussian", n=20, p=12, n_eval=200, seed=2)
    _, held = simulate.simulate(design)

    res = simulate.evaluate(_oracle(design), held)

    assert res.auc is None
    assert res.mean_deviance == pytest.approx(res.deviance / 200)
    # unit noise
    assert res.mean_deviance == pytest.approx(1.0, abs=0.25)


def test_evaluate_rejects_family_mismatch():
    design = SimDesign(family="gaussian", n=20, p=12, n_eval=20)
    _, held = simulate.simulate(design)
    other = Dataset(X=held.X, y=held.y, family="poisson")

    with pytest.raises(errors.MismatchError):
        simulate.evaluate(_oracle(design), other)


def test_oracle_beats_null_model():
    wins = 0

    for seed in range(20):
        design = SimDesign(family="binomial", n=10, p=15, seed=seed)
        _, held = simulate.simulate(design)

        oracle = simulate.evaluate(_oracle(design), held)
        null = simulate.evaluate(_null(design), held)

        assert oracle.auc is not None
        wins += oracle.deviance < null.deviance

    assert wins >= 19


def test_ordinal_design_validation():
    with pytest.raises(errors.UsageError):
        OrdinalDesign(n=10, p=20, cutpoints=(1.0, 0.0))

    with pytest.raises(errors.UsageError):
        OrdinalDesign(n=10, p=20, cutpoints=())

    with pytest.raises(errors.UsageError):
        OrdinalDesign(n=10, p=5)


def test_sample_categories_extremes(rng):
    cutpoints = [-1.0, 0.0, 1.0]

    low = simulate.sample_categories(np.full(50, -100.0), cutpoints, rng)
    high = simulate.sample_categories(np.full(50, 100.0), cutpoints, rng)

    assert np.all(low == 1.0)
    assert np.all(high == 4.0)


def test_sample_categories_frequencies(rng):
    cutpoints = np.array([-1.0, 0.5])
    y = simulate.sample_categories(np.zeros(20000), cutpoints, rng)
    cum = 1.0 / (1.0 + np.exp(-cutpoints))

    assert np.mean(y <= 1.0) == pytest.approx(cum[0], abs=0.02)
    assert np.mean(y <= 2.0) == pytest.approx(cum[1], abs=0.02)


def test_simulate_ordinal():
    design = OrdinalDesign(n=200, p=12, seed=5, n_eval=50)

    train, held = simulate.simulate_ordinal(design)
    again, _ = simulate.simulate_ordinal(design)

    assert train.family == "ordinal"
    assert held.n == 50
    assert set(np.unique(train.y)) <= {1.0, 2.0, 3.0, 4.0, 5.0}
    np.testing.assert_array_equal(train.y, again.y)
