"""
Design matrices: datasets, column standardization and the canonical indexing
of pairwise interactions.

Interactions are indexed by a flat index j in [0, q). With squares included
the pairs (a, b), a <= b, are enumerated row by row:

    (0, 0), (0, 1), ..., (0, p-1), (1, 1), (1, 2), ..., (p-1, p-1)

so q = p (p + 1) / 2 and every anchor `a` owns a contiguous range of flat
indices. Without squares the diagonal is skipped and q = p (p - 1) / 2.
"""

from dataclasses import dataclass
import functools
import typing as t

import numpy as np
from numpy import typing as npt

from sprinter import errors

__all__ = (
    "Dataset",
    "Standardization",
    "PairIndex",
    "Pairs",
    "standardize",
    "check_matrix",
)


FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True, kw_only=True)
class Dataset:
    # n x p main effects, column-major
    X: FloatArray
    # response, length n
    y: FloatArray
    # natural parameter used to draw y, only for simulated data
    theta: FloatArray | None = None
    # family token the data was simulated from, if known
    family: str | None = None
    names: t.Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.X.ndim != 2:
            raise errors.DimensionError("X must be two dimensional")

        if self.X.shape[0] != self.y.shape[0]:
            raise errors.DimensionError(
                f"X has {self.X.shape[0]} rows, y has {self.y.shape[0]}"
            )

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    def subset(self, rows: npt.ArrayLike) -> "Dataset":
        rows = np.asarray(rows)

        return Dataset(
            X=np.asfortranarray(self.X[rows]),
            y=self.y[rows],
            theta=None if self.theta is None else self.theta[rows],
            family=self.family,
            names=self.names,
        )


def check_matrix(X: npt.ArrayLike, name: str = "X") -> FloatArray:
    """
    Return `X` as a finite, two dimensional, column-major float matrix.
    """
    X = np.asarray(X, dtype=np.float64)

    if X.ndim != 2:
        raise errors.DimensionError(f"{name} must be two dimensional")

    if not np.all(np.isfinite(X)):
        raise errors.InputError(f"{name} contains non-finite values")

    return np.asfortranarray(X)


@dataclass(frozen=True, kw_only=True)
class Standardization:
    center: FloatArray
    scale: FloatArray
    # columns without variance, they standardize to exactly zero
    constant: npt.NDArray[np.bool_]

    @classmethod
    def identity(cls, p: int) -> "Standardization":
        return cls(
            center=np.zeros(p),
            scale=np.ones(p),
            constant=np.zeros(p, dtype=bool),
        )

    def apply(self, X: npt.ArrayLike) -> FloatArray:
        X = np.asarray(X, dtype=np.float64)

        if X.ndim != 2 or X.shape[1] != self.center.shape[0]:
            raise errors.DimensionError(
                f"expected {self.center.shape[0]} columns, got shape {X.shape}"
            )

        Xs = np.asfortranarray((X - self.center) / self.scale)
        Xs[:, self.constant] = 0.0

        return Xs


def standardize(X: npt.ArrayLike) -> t.Tuple[FloatArray, Standardization]:
    """
    Center every column and scale it to unit (population) variance. Columns
    without variance get scale 1 and become identically zero.
    """
    X = np.asarray(X, dtype=np.float64)

    center = X.mean(axis=0)
    spread = X.std(axis=0)
    constant = spread <= 1e-12 * (1.0 + np.abs(center))

    std = Standardization(
        center=center,
        scale=np.where(constant, 1.0, spread),
        constant=constant,
    )

    return std.apply(X), std


@dataclass(frozen=True, slots=True, order=True)
class PairIndex:
    # flat index first so that sorting follows the canonical enumeration
    flat: int
    a: int
    b: int

    def as_tuple(self) -> t.Tuple[int, int]:
        return (self.a, self.b)


class Pairs:
    """
    Bijection between flat interaction indices and column pairs for `p`
    main effects.
    """

    p: int
    squares: bool
    q: int

    _starts: IntArray

    def __init__(self, p: int, squares: bool = True) -> None:
        if p < 1:
            raise errors.DimensionError("at least one main effect is needed")

        self.p = p
        self.squares = squares

        # number of partners for every anchor a
        counts = np.arange(p, 0, -1, dtype=np.int64)

        if not squares:
            counts = counts - 1

        self._starts = np.concatenate(([0], np.cumsum(counts)))
        self.q = int(self._starts[-1])

    def __len__(self) -> int:
        return self.q

    def __repr__(self) -> str:
        return f"Pairs(p={self.p}, squares={self.squares}, q={self.q})"

    def flat(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a

        if not (0 <= a and b < self.p) or (a == b and not self.squares):
            raise errors.DimensionError(f"no interaction ({a}, {b})")

        offset = b - a if self.squares else b - a - 1

        return int(self._starts[a] + offset)

    def pair(self, flat: int) -> PairIndex:
        a, b = self.arrays(flat, flat + 1)

        return PairIndex(flat=flat, a=int(a[0]), b=int(b[0]))

    def arrays(self, start: int, stop: int) -> t.Tuple[IntArray, IntArray]:
        """
        Column indices `(a, b)` for the flat range [start, stop).
        """
        if start < 0 or stop > self.q or start > stop:
            raise errors.DimensionError(
                f"flat range [{start}, {stop}) outside [0, {self.q})"
            )

        flat = np.arange(start, stop, dtype=np.int64)
        a = np.searchsorted(self._starts, flat, side="right") - 1
        b = flat - self._starts[a] + a

        if not self.squares:
            b = b + 1

        return a, b

    def index(self, pairs: t.Iterable[t.Tuple[int, int]]) -> t.List[PairIndex]:
        ret = []

        for a, b in pairs:
            a, b = min(a, b), max(a, b)
            ret.append(PairIndex(flat=self.flat(a, b), a=a, b=b))

        return ret

    @functools.cached_property
    def all(self) -> t.Tuple[IntArray, IntArray]:
        return self.arrays(0, self.q)


def interaction_columns(
    Xs: FloatArray,
    a: npt.ArrayLike,
    b: npt.ArrayLike,
    out: FloatArray | None = None,
) -> FloatArray:
    """
    Materialize the columns Xs[:, a] * Xs[:, b] as an n x len(a) matrix.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)

    if out is None:
        out = np.empty((Xs.shape[0], a.shape[0]), order="F")

    np.multiply(Xs[:, a], Xs[:, b], out=out)

    return out


def selected_columns(
    X: npt.ArrayLike,
    std: Standardization,
    pairs: t.Sequence[PairIndex],
) -> FloatArray:
    """
    Interaction columns for `pairs`, built from `X` standardized with the
    training-time `std`.
    """
    Xs = std.apply(X)

    if not pairs:
        return np.zeros((Xs.shape[0], 0), order="F")

    a = np.array([pair.a for pair in pairs], dtype=np.int64)
    b = np.array([pair.b for pair in pairs], dtype=np.int64)

    return interaction_columns(Xs, a, b)
