import math

import numpy as np
import pytest

from sprinter import errors
from sprinter.families import get_family


@pytest.mark.parametrize(
    "kind,theta,expected",
    [
        ("gaussian", 0.0, 0.0),
        ("binomial", 0.0, math.log(2.0)),
        ("poisson", 1.0, math.e),
    ],
)
def test_cumulant(kind, theta, expected):
    assert float(get_family(kind).cumulant(theta)) == pytest.approx(expected)


@pytest.mark.parametrize(
    "kind,theta,mean,variance",
    [
        ("binomial", 0.0, 0.5, 0.25),
        ("gaussian", 3.7, 3.7, 1.0),
        ("poisson", 0.0, 1.0, 1.0),
    ],
)
def test_mean_and_variance(kind, theta, mean, variance):
    family = get_family(kind)

    assert float(family.mean(theta)) == pytest.approx(mean)
    assert float(family.variance(theta)) == pytest.approx(variance)


@pytest.mark.parametrize("kind", ["gaussian", "binomial", "poisson"])
def test_variance_positive_and_mean_increasing(kind):
    family = get_family(kind)
    theta = np.linspace(-40.0, 40.0, 401)

    assert np.all(family.variance(theta) > 0.0)
    assert np.all(np.diff(family.mean(theta)) >= 0.0)


@pytest.mark.parametrize("kind", ["gaussian", "binomial", "poisson"])
def test_link_inverts_mean(kind):
    family = get_family(kind)
    theta = np.linspace(-5.0, 5.0, 11)

    np.testing.assert_allclose(family.link(family.mean(theta)), theta)


def test_neg_loglik_gaussian_at_response(rng):
    y = rng.standard_normal(20)

    assert get_family("gaussian").neg_loglik(y, y) == pytest.approx(
        -np.mean(y * y) / 2.0
    )


def test_neg_loglik_examples():
    binomial = get_family("binomial")
    poisson = get_family("poisson")

    assert binomial.neg_loglik([0.0, 0.0], [0.0, 1.0]) == pytest.approx(
        math.log(2.0)
    )
    assert poisson.neg_loglik([0.0, 0.0], [1.0, 2.0]) == pytest.approx(1.0)


def test_neg_loglik_shape_mismatch():
    with pytest.raises(errors.DimensionError):
        get_family("gaussian").neg_loglik([0.0, 1.0], [0.0])


@pytest.mark.parametrize(
    "kind,y",
    [
        ("gaussian", [0.3, -1.2, 4.0]),
        ("binomial", [0.3, 0.6, 0.9]),
        ("poisson", [0.5, 2.0, 7.0]),
    ],
)
def test_saturated_deviance_is_zero(kind, y):
    assert get_family(kind).deviance(y, y) == pytest.approx(0.0, abs=1e-12)


def test_deviance_examples():
    binomial = get_family("binomial")
    poisson = get_family("poisson")

    assert binomial.deviance([0.5, 0.5], [0.0, 1.0]) == pytest.approx(
        4.0 * math.log(2.0)
    )
    assert poisson.deviance([1.0, 1.0], [2.0, 0.0]) == pytest.approx(
        4.0 * math.log(2.0)
    )


def test_deviance_outside_mean_domain():
    with pytest.raises(errors.DomainError):
        get_family("binomial").deviance([1.0, 0.5], [1.0, 0.0])

    with pytest.raises(errors.DomainError):
        get_family("poisson").deviance([0.0], [0.0])


def test_clamp_keeps_means_inside_domain():
    binomial = get_family("binomial")
    mu = binomial.mean([-1000.0, 1000.0])

    assert 0.0 < mu[0] < mu[1] < 1.0
    assert np.isfinite(get_family("poisson").mean(1000.0))


def test_validate_response():
    assert get_family("poisson").validate_response([0, 3]).dtype == np.float64

    with pytest.raises(errors.InputError):
        get_family("gaussian").validate_response([1.0, math.nan])

    with pytest.raises(errors.MismatchError):
        get_family("binomial").validate_response([0.0, 2.0])

    with pytest.raises(errors.MismatchError):
        get_family("poisson").validate_response([-1.0, 2.0])


def test_null_mean_stays_in_domain():
    assert 0.0 < get_family("binomial").null_mean([0.0, 0.0]) < 1.0
    assert get_family("poisson").null_mean([0.0, 0.0]) > 0.0
    assert get_family("gaussian").null_mean([1.0, 3.0]) == 2.0


def test_get_family():
    family = get_family("binomial")

    assert get_family(family) is family
    assert family.theta_clamp == 30.0
    assert math.isinf(get_family("gaussian").theta_clamp)

    with pytest.raises(errors.UsageError):
        get_family("weibull")
