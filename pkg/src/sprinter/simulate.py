"""
Simulated designs with planted main effects and interactions, and the
metrics used to compare fitted models on held-out data.
"""

from dataclasses import dataclass
import math
import typing as t

import numpy as np
from numpy import typing as npt
from scipy import special, stats

from sprinter import errors, logging
from sprinter.design import Dataset
from sprinter.families import Family, Kind, get_family

__all__ = (
    "Structure",
    "SimDesign",
    "OrdinalDesign",
    "Evaluation",
    "Predictor",
    "structure_sets",
    "simulate",
    "simulate_ordinal",
    "sample_categories",
    "planted_theta",
    "main_interaction_ratio",
    "auc",
    "evaluate",
)


FloatArray = npt.NDArray[np.float64]
Structure = t.Literal["mixed", "hierarchical", "anti_hierarchical"]

logger = logging.get_logger(__name__)

Pair = t.Tuple[int, int]

# zero-based (main effects, interactions) for every structure
_WIDE: t.Dict[Structure, t.Tuple[t.Tuple[int, ...], t.Tuple[Pair, ...]]] = {
    "mixed": ((0, 1, 2), ((0, 3), (1, 4), (5, 6), (7, 8), (9, 10))),
    "hierarchical": ((0, 1, 2), ((0, 2), (0, 3), (1, 4), (2, 5), (0, 6))),
    "anti_hierarchical": (
        (0, 1, 2),
        ((3, 4), (5, 6), (7, 8), (9, 10), (11, 12)),
    ),
}

_NARROW: t.Dict[Structure, t.Tuple[t.Tuple[int, ...], t.Tuple[Pair, ...]]] = {
    "mixed": ((0, 1), ((0, 2), (3, 4), (5, 6))),
    "hierarchical": ((0, 1), ((0, 1), (0, 2), (1, 3))),
    "anti_hierarchical": ((0, 1), ((2, 3), (4, 5), (6, 7))),
}

# poisson natural parameters are clamped here before drawing counts
POISSON_THETA_MAX = 20.0


def structure_sets(
    kind: Kind,
    structure: str,
) -> t.Tuple[t.Tuple[int, ...], t.Tuple[Pair, ...]]:
    """
    Zero-based main-effect indices and interaction pairs for a structure.
    Poisson designs use the sparser tables.
    """
    if structure == "anti":
        structure = "anti_hierarchical"

    table = _NARROW if kind == "poisson" else _WIDE

    try:
        return table[t.cast(Structure, structure)]
    except KeyError:
        raise errors.UsageError(f"unknown structure: {structure!r}") from None


@dataclass(frozen=True, kw_only=True)
class SimDesign:
    family: Kind
    n: int
    p: int
    structure: Structure = "mixed"
    beta_value: float = 1.0
    gamma_value: float = 4.0
    # None means 0.5 for poisson and 1 otherwise
    x_variance: float | None = None
    seed: int = 0
    # None means 100 for binomial and 1000 otherwise
    n_eval: int | None = None
    # gaussian noise standard deviation
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.p < 1:
            raise errors.UsageError("n and p must be positive")

        main, pairs = structure_sets(self.family, self.structure)
        widest = max([*main, *(b for _, b in pairs)])

        if self.p <= widest:
            raise errors.UsageError(
                f"structure {self.structure} needs p > {widest}, got {self.p}"
            )

        if self.resolved_x_variance <= 0.0:
            raise errors.UsageError("x_variance must be positive")

    @property
    def resolved_x_variance(self) -> float:
        if self.x_variance is not None:
            return self.x_variance

        return 0.5 if self.family == "poisson" else 1.0

    @property
    def resolved_n_eval(self) -> int:
        if self.n_eval is not None:
            return self.n_eval

        return 100 if self.family == "binomial" else 1000

    @property
    def main_effects(self) -> t.Tuple[int, ...]:
        return structure_sets(self.family, self.structure)[0]

    @property
    def interactions(self) -> t.Tuple[Pair, ...]:
        return structure_sets(self.family, self.structure)[1]


def planted_theta(design: SimDesign, X: npt.ArrayLike) -> FloatArray:
    """
    X beta* + Z gamma* over the design's planted sets, before any clamping.
    """
    X = np.asarray(X, dtype=np.float64)
    main = list(design.main_effects)

    theta = design.beta_value * X[:, main].sum(axis=1)

    for a, b in design.interactions:
        theta = theta + design.gamma_value * X[:, a] * X[:, b]

    return theta


def main_interaction_ratio(design: SimDesign, X: npt.ArrayLike) -> float:
    """
    ||X beta*||^2 / ||Z gamma*||^2, large when main effects dominate.
    """
    X = np.asarray(X, dtype=np.float64)
    main = design.beta_value * X[:, list(design.main_effects)].sum(axis=1)
    inter = np.zeros(X.shape[0])

    for a, b in design.interactions:
        inter += design.gamma_value * X[:, a] * X[:, b]

    denom = float(inter @ inter)

    if denom == 0.0:
        return math.inf

    return float(main @ main) / denom


def _draw(
    design: SimDesign,
    family: Family,
    n: int,
    rng: np.random.Generator,
) -> Dataset:
    X = math.sqrt(design.resolved_x_variance) * rng.standard_normal(
        (n, design.p)
    )
    theta = planted_theta(design, X)

    match family.kind:
        case "gaussian":
            y = theta + design.noise_sd * rng.standard_normal(n)
        case "binomial":
            y = rng.binomial(1, special.expit(theta)).astype(np.float64)
        case "poisson":
            clamped = np.minimum(theta, POISSON_THETA_MAX)

            if np.any(clamped < theta):
                logger.debug(
                    "simulate.theta_clamped",
                    count=int(np.sum(clamped < theta)),
                )

            y = rng.poisson(np.exp(clamped)).astype(np.float64)

    return Dataset(
        X=np.asfortranarray(X),
        y=y,
        theta=theta,
        family=family.kind,
        names=tuple(f"x{k + 1}" for k in range(design.p)),
    )


def simulate(design: SimDesign) -> t.Tuple[Dataset, Dataset]:
    """
    Draw an independent training set and evaluation set.

    Both streams are spawned from `design.seed` and use PCG64, so the same
    design gives the same data everywhere.
    """
    family = get_family(design.family)
    train_seq, eval_seq = np.random.SeedSequence(design.seed).spawn(2)

    train = _draw(
        design,
        family,
        design.n,
        np.random.Generator(np.random.PCG64(train_seq)),
    )
    held = _draw(
        design,
        family,
        design.resolved_n_eval,
        np.random.Generator(np.random.PCG64(eval_seq)),
    )

    return train, held


def auc(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """
    Area under the ROC curve as the Mann-Whitney concordance, ties count
    one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)

    if scores.shape != labels.shape:
        raise errors.DimensionError(
            f"scores have shape {scores.shape}, labels {labels.shape}"
        )

    if np.any((labels != 0.0) & (labels != 1.0)):
        raise errors.InputError("labels must be 0 or 1")

    pos = labels == 1.0
    n1 = int(pos.sum())
    n0 = labels.shape[0] - n1

    if n1 == 0 or n0 == 0:
        raise errors.InputError("AUC is undefined for a single class")

    ranks = stats.rankdata(scores)
    u = float(ranks[pos].sum()) - n1 * (n1 + 1) / 2.0

    return u / (n1 * n0)


class Predictor(t.Protocol):
    @property
    def family(self) -> Family:
        ...

    def linear_predictor(self, X: npt.ArrayLike) -> FloatArray:
        ...


@dataclass(frozen=True, kw_only=True)
class Evaluation:
    # total deviance over the evaluation rows
    deviance: float
    mean_deviance: float
    # binomial only
    auc: float | None = None
    # ordinal only: share of rows whose most likely category was observed
    accuracy: float | None = None


def evaluate(model: Predictor, data: Dataset) -> Evaluation:
    """
    Deviance of `model` on `data`, plus the AUC for binary responses.
    """
    family = model.family

    if data.family is not None and data.family != family.kind:
        raise errors.MismatchError(
            f"model family {family.kind} does not match data family "
            f"{data.family}"
        )

    y = family.validate_response(data.y)
    mu = family.mean(model.linear_predictor(data.X))
    dev = family.deviance(mu, y)

    score = None

    if family.kind == "binomial":
        score = auc(mu, y)

    return Evaluation(deviance=dev, mean_deviance=dev / data.n, auc=score)


@dataclass(frozen=True, kw_only=True)
class OrdinalDesign:
    """
    Proportional odds responses over the logistic structure tables:
    logit P(Y <= t) = c_t - theta with theta from `planted_theta`.
    """

    n: int
    p: int
    structure: Structure = "mixed"
    beta_value: float = 1.0
    gamma_value: float = 1.0
    # k + 1 categories for k cutpoints, non-decreasing
    cutpoints: t.Tuple[float, ...] = (-2.0, -0.7, 0.7, 2.0)
    seed: int = 0
    n_eval: int = 1000

    def __post_init__(self) -> None:
        if not self.cutpoints or np.any(np.diff(self.cutpoints) < 0.0):
            raise errors.UsageError("cutpoints must be non-decreasing")

        main, pairs = structure_sets("binomial", self.structure)
        widest = max([*main, *(b for _, b in pairs)])

        if self.n < 1 or self.p <= widest:
            raise errors.UsageError(
                f"structure {self.structure} needs n >= 1 and p > {widest}"
            )

    @property
    def planted(self) -> SimDesign:
        return SimDesign(
            family="binomial",
            n=self.n,
            p=self.p,
            structure=self.structure,
            beta_value=self.beta_value,
            gamma_value=self.gamma_value,
            seed=self.seed,
        )

    @property
    def main_effects(self) -> t.Tuple[int, ...]:
        return self.planted.main_effects

    @property
    def interactions(self) -> t.Tuple[Pair, ...]:
        return self.planted.interactions


def sample_categories(
    theta: npt.ArrayLike,
    cutpoints: npt.ArrayLike,
    rng: np.random.Generator,
) -> FloatArray:
    """
    Draw categories 1..k+1 with P(Y <= t) = expit(c_t - theta).
    """
    theta = np.asarray(theta, dtype=np.float64)
    cum = special.expit(
        np.asarray(cutpoints, dtype=np.float64)[None, :] - theta[:, None]
    )
    draw = rng.random(theta.shape[0])

    return 1.0 + np.sum(draw[:, None] > cum, axis=1).astype(np.float64)


def simulate_ordinal(design: OrdinalDesign) -> t.Tuple[Dataset, Dataset]:
    """
    Training and evaluation sets with ordinal responses, seeded like
    `simulate`.
    """
    planted = design.planted
    sizes = (design.n, design.n_eval)
    ret = []

    for size, seq in zip(
        sizes, np.random.SeedSequence(design.seed).spawn(2), strict=True
    ):
        rng = np.random.Generator(np.random.PCG64(seq))
        X = rng.standard_normal((size, design.p))
        theta = planted_theta(planted, X)

        ret.append(
            Dataset(
                X=np.asfortranarray(X),
                y=sample_categories(theta, design.cutpoints, rng),
                theta=theta,
                family="ordinal",
                names=tuple(f"x{k + 1}" for k in range(design.p)),
            )
        )

    return ret[0], ret[1]
