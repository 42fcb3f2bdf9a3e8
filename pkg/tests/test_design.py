import numpy as np
import pytest

from sprinter import design, errors
from sprinter.design import Dataset, PairIndex, Pairs


def test_pairs_with_squares_enumerate_row_by_row():
    pairs = Pairs(4)
    a, b = pairs.all

    assert len(pairs) == 10
    assert list(zip(a.tolist(), b.tolist())) == [
        (0, 0), (0, 1), (0, 2), (0, 3),
        (1, 1), (1, 2), (1, 3),
        (2, 2), (2, 3),
        (3, 3),
    ]  # fmt: skip


def test_pairs_without_squares():
    pairs = Pairs(4, squares=False)
    a, b = pairs.all

    assert pairs.q == 6
    assert np.all(a < b)

    with pytest.raises(errors.DimensionError):
        pairs.flat(2, 2)


@pytest.mark.parametrize("squares", [True, False])
def test_flat_and_pair_are_inverse(squares):
    pairs = Pairs(9, squares=squares)

    for j in range(pairs.q):
        pair = pairs.pair(j)

        assert pair.a <= pair.b
        assert pairs.flat(pair.a, pair.b) == j
        assert pairs.flat(pair.b, pair.a) == j


def test_arrays_match_full_enumeration():
    pairs = Pairs(7)
    a, b = pairs.all
    sub_a, sub_b = pairs.arrays(5, 17)

    np.testing.assert_array_equal(sub_a, a[5:17])
    np.testing.assert_array_equal(sub_b, b[5:17])

    with pytest.raises(errors.DimensionError):
        pairs.arrays(0, pairs.q + 1)


def test_index_orders_pairs():
    pairs = Pairs(5)

    assert pairs.index([(3, 1)]) == [PairIndex(flat=pairs.flat(1, 3), a=1, b=3)]

    with pytest.raises(errors.DimensionError):
        pairs.index([(0, 5)])


def test_pairs_needs_a_column():
    with pytest.raises(errors.DimensionError):
        Pairs(0)


def test_standardize(rng):
    X = rng.normal(loc=3.0, scale=2.0, size=(50, 4))
    X[:, 2] = 1.5

    Xs, std = design.standardize(X)

    np.testing.assert_allclose(Xs.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Xs[:, [0, 1, 3]].std(axis=0), 1.0)
    assert np.all(Xs[:, 2] == 0.0)
    assert std.constant.tolist() == [False, False, True, False]
    assert std.scale[2] == 1.0
    assert Xs.flags.f_contiguous


def test_standardization_apply_checks_width(rng):
    _, std = design.standardize(rng.standard_normal((10, 3)))

    with pytest.raises(errors.DimensionError):
        std.apply(np.zeros((4, 2)))


def test_identity_standardization_is_a_no_op(rng):
    X = rng.standard_normal((6, 3))

    std = design.Standardization.identity(3)

    np.testing.assert_array_equal(std.apply(X), X)


def test_check_matrix():
    assert design.check_matrix([[1, 2], [3, 4]]).dtype == np.float64

    with pytest.raises(errors.DimensionError):
        design.check_matrix([1.0, 2.0])

    with pytest.raises(errors.InputError):
        design.check_matrix([[1.0, np.inf]])


def test_interaction_columns(rng):
    Xs = rng.standard_normal((8, 3))
    Z = design.interaction_columns(Xs, [0, 1], [2, 1])

    np.testing.assert_allclose(Z[:, 0], Xs[:, 0] * Xs[:, 2])
    np.testing.assert_allclose(Z[:, 1], Xs[:, 1] ** 2)


def test_selected_columns_use_training_standardization(rng):
    X = rng.normal(loc=1.0, size=(20, 3))
    Xs, std = design.standardize(X)
    pairs = Pairs(3).index([(0, 2)])

    Z = design.selected_columns(X[:5], std, pairs)

    np.testing.assert_allclose(Z[:, 0], Xs[:5, 0] * Xs[:5, 2])
    assert design.selected_columns(X, std, []).shape == (20, 0)


def test_dataset_checks_rows(rng):
    with pytest.raises(errors.DimensionError):
        Dataset(X=rng.standard_normal((5, 2)), y=np.zeros(4))


def test_dataset_subset(rng):
    data = Dataset(
        X=rng.standard_normal((6, 2)),
        y=np.arange(6.0),
        theta=np.arange(6.0),
        family="gaussian",
    )
    sub = data.subset([0, 2])

    assert (sub.n, sub.p) == (2, 2)
    assert sub.y.tolist() == [0.0, 2.0]
    assert sub.family == "gaussian"
