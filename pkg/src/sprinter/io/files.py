"""
On-disk formats.

Datasets are CSV files with a header x1,...,xp,y and one row per
observation. Models are versioned JSON documents. Column numbers in every
file are one-based, matching the x1..xp header.
"""

import csv
import datetime
import os
import typing as t

import msgspec
import numpy as np
from numpy import typing as npt

from sprinter import errors, logging
from sprinter.design import Dataset, PairIndex, Pairs, Standardization
from sprinter.families import get_family
from sprinter.io import json
from sprinter.ordinal import OrdinalInteractionModel
from sprinter.pipeline import InteractionModel
from sprinter.screen import ScreenResult

__all__ = (
    "FORMAT_VERSION",
    "Provenance",
    "ModelFile",
    "Model",
    "read_dataset",
    "write_dataset",
    "to_model_file",
    "from_model_file",
    "save_model",
    "load_model",
    "write_screen",
    "write_predictions",
    "write_csv",
)


FloatArray = npt.NDArray[np.float64]
Model = t.Union[InteractionModel, OrdinalInteractionModel]

FORMAT_VERSION = 1

logger = logging.get_logger(__name__)


def _fmt(value: float) -> str:
    return "%.10g" % value


def _open(path: str, mode: str) -> t.IO[str]:
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise errors.UsageError(f"no such file: {path}") from None
    except OSError as e:
        raise errors.UsageError(f"cannot open {path}: {e}") from e


def read_dataset(path: str, family: str | None = None) -> Dataset:
    """
    Read a dataset CSV. The last column is the response.
    """
    with _open(path, "r") as fp:
        rows = list(csv.reader(fp))

    if not rows:
        raise errors.InputError(f"{path} is empty")

    header, body = rows[0], rows[1:]

    if len(header) < 2:
        raise errors.InputError(f"{path} needs at least one feature and y")

    values = np.empty((len(body), len(header)))

    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise errors.InputError(
                f"{path}:{i} has {len(row)} fields, expected {len(header)}"
            )

        try:
            values[i - 2] = [float(cell) for cell in row]
        except ValueError:
            raise errors.InputError(
                f"{path}:{i} has a non-numeric cell"
            ) from None

    if not np.all(np.isfinite(values)):
        raise errors.InputError(f"{path} contains missing or infinite cells")

    logger.debug("files.read_dataset", path=path, rows=len(body))

    return Dataset(
        X=np.asfortranarray(values[:, :-1]),
        y=values[:, -1].copy(),
        family=family,
        names=tuple(header[:-1]),
    )


def write_csv(
    path: str,
    header: t.Sequence[str],
    rows: t.Iterable[t.Sequence[t.Any]],
) -> None:
    with _open(path, "w") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)

        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) else v for v in row]
            )


def write_dataset(path: str, data: Dataset) -> None:
    names = data.names or tuple(f"x{k + 1}" for k in range(data.p))

    write_csv(
        path,
        [*names, "y"],
        (
            [*map(float, data.X[i]), float(data.y[i])]
            for i in range(data.n)
        ),
    )


class Provenance(msgspec.Struct, frozen=True, kw_only=True):
    seed: int
    config_hash: str
    # ISO timestamp, only recorded on request so files stay reproducible
    fitted_at: str | None = None


class ModelFile(msgspec.Struct, frozen=True, kw_only=True):
    format_version: int = FORMAT_VERSION
    family: str
    n_features: int
    intercept: float = 0.0
    # (column, value), nonzero only
    main_coefs: t.List[t.Tuple[int, float]] = []
    # (column a, column b, value)
    interactions: t.List[t.Tuple[int, int, float]] = []
    center: t.List[float] = []
    scale: t.List[float] = []
    constant: t.List[bool] = []
    # ordinal only
    cutpoints: t.List[float] | None = None
    squares: bool = True
    degenerate: bool = False
    provenance: Provenance | None = None


def _unwrap(model: t.Any) -> Model:
    # SprinterModel, OrdinalSprinterModel and BaselineFit carry the model
    inner = getattr(model, "model", model)

    if not isinstance(inner, (InteractionModel, OrdinalInteractionModel)):
        raise errors.UsageError(f"cannot save {type(model).__name__}")

    return inner


def to_model_file(
    model: t.Any,
    seed: int = 0,
    config_hash: str = "",
    stamp: bool = False,
) -> ModelFile:
    inner = _unwrap(model)
    p = inner.n_features
    std = inner.std or Standardization.identity(p)
    screen = getattr(model, "screen", None)

    if isinstance(inner, OrdinalInteractionModel):
        family = "ordinal"
        intercept = 0.0
        cutpoints: t.List[float] | None = [float(c) for c in inner.cutpoints]
    else:
        family = inner.family.kind
        intercept = inner.intercept
        cutpoints = None

    return ModelFile(
        family=family,
        n_features=p,
        intercept=float(intercept),
        main_coefs=[
            (int(k) + 1, float(inner.main_coefs[k]))
            for k in np.flatnonzero(inner.main_coefs)
        ],
        interactions=[
            (pair.a + 1, pair.b + 1, float(value))
            for pair, value in inner.interactions
        ],
        center=[float(v) for v in std.center],
        scale=[float(v) for v in std.scale],
        constant=[bool(v) for v in std.constant],
        cutpoints=cutpoints,
        squares=True if screen is None else bool(screen.squares),
        degenerate=bool(getattr(model, "degenerate", False)),
        provenance=Provenance(
            seed=seed,
            config_hash=config_hash,
            fitted_at=(
                datetime.datetime.now(datetime.timezone.utc).isoformat()
                if stamp
                else None
            ),
        ),
    )


def from_model_file(doc: ModelFile) -> Model:
    if doc.format_version != FORMAT_VERSION:
        raise errors.InputError(
            f"unsupported model format version {doc.format_version}"
        )

    p = doc.n_features

    if not (len(doc.center) == len(doc.scale) == len(doc.constant) == p):
        raise errors.InputError("standardization does not match n_features")

    main = np.zeros(p)

    for k, value in doc.main_coefs:
        if not 1 <= k <= p:
            raise errors.InputError(f"main effect column {k} out of range")

        main[k - 1] = value

    pairs = Pairs(p, squares=doc.squares)
    interactions = tuple(
        (
            PairIndex(flat=pairs.flat(a - 1, b - 1), a=a - 1, b=b - 1),
            float(value),
        )
        for a, b, value in doc.interactions
    )
    std = Standardization(
        center=np.array(doc.center, dtype=np.float64),
        scale=np.array(doc.scale, dtype=np.float64),
        constant=np.array(doc.constant, dtype=bool),
    )

    if doc.family == "ordinal":
        if not doc.cutpoints:
            raise errors.InputError("ordinal model without cutpoints")

        return OrdinalInteractionModel(
            cutpoints=np.array(doc.cutpoints, dtype=np.float64),
            main_coefs=main,
            interactions=interactions,
            std=std,
        )

    try:
        family = get_family(doc.family)
    except errors.UsageError as e:
        raise errors.InputError(str(e)) from e

    return InteractionModel(
        family=family,
        intercept=doc.intercept,
        main_coefs=main,
        interactions=interactions,
        std=std,
    )


def save_model(path: str, doc: ModelFile) -> None:
    data = json.dumps(doc, indent=2)

    try:
        with open(path, "wb") as fp:
            fp.write(data)
            fp.write(b"\n")
    except OSError as e:
        raise errors.UsageError(f"cannot write {path}: {e}") from e


def load_model(path: str) -> t.Tuple[Model, ModelFile]:
    if not os.path.exists(path):
        raise errors.UsageError(f"no such file: {path}")

    with open(path, "rb") as fp:
        doc = json.loads(fp.read(), type=ModelFile)

    return from_model_file(doc), doc


def write_screen(path: str, result: ScreenResult) -> None:
    write_csv(
        path,
        ["a", "b", "gamma_hat"],
        ([pair.a + 1, pair.b + 1, gamma] for pair, gamma in result.selected),
    )


def write_predictions(path: str, model: Model, X: npt.ArrayLike) -> None:
    """
    One fitted mean per row; ordinal models add the most likely class and
    every category probability.
    """
    if isinstance(model, OrdinalInteractionModel):
        prob = model.predict_proba(X)
        mean = prob @ np.arange(1.0, prob.shape[1] + 1.0)
        cls = prob.argmax(axis=1) + 1

        write_csv(
            path,
            ["mean", "class", *(f"p{j + 1}" for j in range(prob.shape[1]))],
            (
                [float(mean[i]), int(cls[i]), *map(float, prob[i])]
                for i in range(prob.shape[0])
            ),
        )

        return

    mu = model.predict(X)
    write_csv(path, ["mean"], ([float(v)] for v in mu))
