"""
Exponential families with canonical links.

A family is described by its cumulant function b(theta): the mean is b'(theta),
the variance function is b''(theta) and the negative log-likelihood of a single
observation is l(theta, y) = b(theta) - theta * y. Every solver and the
screening pass only ever talk to a family through this interface.
"""

from dataclasses import dataclass
import math
import typing as t

import numpy as np
from numpy import typing as npt
from scipy import special

from sprinter import errors

__all__ = (
    "Family",
    "Kind",
    "get_family",
)


Kind = t.Literal["gaussian", "binomial", "poisson"]
ArrayLike = npt.ArrayLike
FloatArray = npt.NDArray[np.float64]

DEFAULT_CLAMP: t.Dict[Kind, float] = {
    "gaussian": math.inf,
    "binomial": 30.0,
    "poisson": 30.0,
}


@dataclass(frozen=True, kw_only=True, slots=True)
class Family:
    kind: Kind
    # |theta| is clamped to this before any exp() is taken
    theta_clamp: float = math.inf

    def clamp(self, theta: ArrayLike) -> FloatArray:
        theta = np.asarray(theta, dtype=np.float64)

        if math.isinf(self.theta_clamp):
            return theta

        return np.clip(theta, -self.theta_clamp, self.theta_clamp)

    def cumulant(self, theta: ArrayLike) -> FloatArray:
        """
        b(theta).
        """
        theta = self.clamp(theta)

        match self.kind:
            case "gaussian":
                return theta * theta / 2.0
            case "binomial":
                return np.maximum(theta, 0.0) + np.log1p(np.exp(-np.abs(theta)))
            case "poisson":
                return np.exp(theta)

        raise AssertionError(self.kind)

    def mean(self, theta: ArrayLike) -> FloatArray:
        """
        b'(theta), the inverse canonical link.
        """
        theta = self.clamp(theta)

        match self.kind:
            case "gaussian":
                return theta
            case "binomial":
                return special.expit(theta)
            case "poisson":
                return np.exp(theta)

        raise AssertionError(self.kind)

    def variance(self, theta: ArrayLike) -> FloatArray:
        """
        b''(theta), strictly positive on the clamped domain.
        """
        theta = self.clamp(theta)

        match self.kind:
            case "gaussian":
                return np.ones_like(theta)
            case "binomial":
                mu = special.expit(theta)

                return mu * (1.0 - mu)
            case "poisson":
                return np.exp(theta)

        raise AssertionError(self.kind)

    def link(self, mu: ArrayLike) -> FloatArray:
        """
        theta(mu), the canonical link. `mu` must lie in the mean domain.
        """
        mu = self.check_mean(mu)

        match self.kind:
            case "gaussian":
                return mu
            case "binomial":
                return special.logit(mu)
            case "poisson":
                return np.log(mu)

        raise AssertionError(self.kind)

    def neg_loglik(self, theta: ArrayLike, y: ArrayLike) -> float:
        """
        Mean over observations of b(theta_i) - theta_i * y_i.
        """
        theta = np.asarray(theta, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)

        if theta.shape != y.shape:
            raise errors.DimensionError(
                f"theta has shape {theta.shape}, y has shape {y.shape}"
            )

        if theta.size == 0:
            return 0.0

        theta = self.clamp(theta)

        return float(np.mean(self.cumulant(theta) - theta * y))

    def check_mean(self, mu: ArrayLike) -> FloatArray:
        mu = np.asarray(mu, dtype=np.float64)

        match self.kind:
            case "gaussian":
                ok = np.isfinite(mu)
            case "binomial":
                ok = (mu > 0.0) & (mu < 1.0)
            case "poisson":
                ok = (mu > 0.0) & np.isfinite(mu)

        if not np.all(ok):
            raise errors.DomainError(
                f"{self.kind} means outside the mean domain"
            )

        return mu

    def deviance(self, mu: ArrayLike, y: ArrayLike) -> float:
        """
        Twice the log-likelihood gap between the saturated model and `mu`.
        Uses the 0 * log(0) = 0 convention for binary and zero-count
        responses.
        """
        mu = self.check_mean(mu)
        y = np.asarray(y, dtype=np.float64)

        if mu.shape != y.shape:
            raise errors.DimensionError(
                f"mu has shape {mu.shape}, y has shape {y.shape}"
            )

        match self.kind:
            case "gaussian":
                unit = (y - mu) ** 2
            case "binomial":
                unit = 2.0 * (
                    special.xlogy(y, y / mu)
                    + special.xlogy(1.0 - y, (1.0 - y) / (1.0 - mu))
                )
            case "poisson":
                unit = 2.0 * (special.xlogy(y, y / mu) - (y - mu))

        # rounding can leave tiny negative terms at mu == y
        return float(np.sum(np.maximum(unit, 0.0)))

    def validate_response(self, y: ArrayLike) -> FloatArray:
        """
        Check that `y` is a valid response for this family.
        """
        y = np.asarray(y, dtype=np.float64)

        if not np.all(np.isfinite(y)):
            raise errors.InputError("response contains non-finite values")

        match self.kind:
            case "binomial":
                if np.any((y < 0.0) | (y > 1.0)):
                    raise errors.MismatchError(
                        "binomial response must lie in [0, 1]"
                    )
            case "poisson":
                if np.any(y < 0.0):
                    raise errors.MismatchError(
                        "poisson response must be non-negative"
                    )

        return y

    def null_mean(self, y: ArrayLike) -> float:
        """
        Mean of the intercept-only fit without offset, kept inside the mean
        domain.
        """
        mu = float(np.mean(np.asarray(y, dtype=np.float64)))

        match self.kind:
            case "binomial":
                return min(max(mu, 1e-10), 1.0 - 1e-10)
            case "poisson":
                return max(mu, 1e-10)

        return mu

    def to_json(self) -> str:
        return self.kind


def get_family(token: "str | Family") -> Family:
    """
    Resolve a family token ("gaussian" | "binomial" | "poisson").
    """
    if isinstance(token, Family):
        return token

    match token:
        case "gaussian" | "binomial" | "poisson":
            return Family(kind=token, theta_clamp=DEFAULT_CLAMP[token])
        case _:
            raise errors.UsageError(f"unknown family: {token!r}")
