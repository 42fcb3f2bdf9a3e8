import numpy as np
import pytest

from sprinter import context
from sprinter.config import ScreenConfig, SolverConfig, SprinterConfig
from sprinter.design import Dataset


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def ctx():
    return context.default()


@pytest.fixture
def quick_cfg() -> SprinterConfig:
    """
    Short lambda paths and three folds, enough for behavioural checks.
    """
    return SprinterConfig(
        solver=SolverConfig(n_lambda=30),
        cv_folds=3,
    )


@pytest.fixture
def planted_gaussian(rng: np.random.Generator) -> Dataset:
    """
    Two main effects and a single strong interaction between x2 and x3
    (zero-based 1 and 2).
    """
    n, p = 300, 10
    X = rng.standard_normal((n, p))
    theta = X[:, 0] - X[:, 4] + 2.0 * X[:, 1] * X[:, 2]
    y = theta + 0.5 * rng.standard_normal(n)

    return Dataset(X=np.asfortranarray(X), y=y, theta=theta, family="gaussian")


@pytest.fixture
def planted_ordinal(rng: np.random.Generator) -> Dataset:
    from sprinter.simulate import sample_categories

    n, p = 600, 8
    X = rng.standard_normal((n, p))
    theta = X[:, 0] + 2.0 * X[:, 1] * X[:, 2]
    y = sample_categories(theta, [-1.5, 0.0, 1.5], rng)

    return Dataset(X=np.asfortranarray(X), y=y, theta=theta, family="ordinal")


@pytest.fixture
def ordinal_cfg() -> SprinterConfig:
    return SprinterConfig(
        family="ordinal",
        solver=SolverConfig(n_lambda=20),
        screen=ScreenConfig(m=10),
        cv_folds=3,
    )
