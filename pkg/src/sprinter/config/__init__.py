import hashlib
import os
import typing as t

import msgspec

from sprinter import errors
from sprinter.config.screen import ScreenConfig
from sprinter.config.solver import SolverConfig

__all__ = (
    "SprinterConfig",
    "ScreenConfig",
    "SolverConfig",
    "load",
    "from_env",
    "config_hash",
)


FamilyToken = t.Literal["gaussian", "binomial", "poisson", "ordinal"]
Tuning = t.Literal["joint", "sequential"]


class SprinterConfig(msgspec.Struct, frozen=True, kw_only=True):
    family: FamilyToken = "gaussian"

    solver: SolverConfig = msgspec.field(default_factory=SolverConfig)
    screen: ScreenConfig = msgspec.field(default_factory=ScreenConfig)

    # folds used for every cross-validated lambda choice
    cv_folds: int = 5
    # joint: CV over (lambda_1, lambda_4) pairs, sequential: fix lambda_1 first
    tuning: Tuning = "sequential"
    # number of lambda_1 candidates tried in joint tuning
    joint_grid: int = 10
    # every random draw (folds, simulation) flows from this seed
    seed: int = 0
    # threads for screening and CV, None means every available core
    workers: int | None = None
    # all-pairs lasso refuses designs with more main effects than this
    p_cap: int = 600


def load(path: str) -> SprinterConfig:
    """
    Load a configuration from a JSON file. Missing keys keep their defaults.
    """
    try:
        with open(path, "rb") as fp:
            raw = fp.read()
    except OSError as exc:
        raise errors.UsageError(f"cannot read config {path}: {exc}") from exc

    try:
        return msgspec.json.decode(raw, type=SprinterConfig)
    except msgspec.DecodeError as exc:
        raise errors.UsageError(f"invalid config {path}: {exc}") from exc


def from_env(cfg: SprinterConfig) -> SprinterConfig:
    """
    Apply environment overrides on top of `cfg`.
    """
    workers = os.environ.get("SPRINTER_WORKERS")

    if workers:
        try:
            cfg = msgspec.structs.replace(cfg, workers=int(workers))
        except ValueError:
            raise errors.UsageError(
                f"SPRINTER_WORKERS must be an integer, got {workers!r}"
            ) from None

    return cfg


def config_hash(cfg: SprinterConfig) -> str:
    """
    sha256 of the canonical JSON encoding, stored in model provenance.
    """
    # worker count never changes results
    canonical = msgspec.structs.replace(cfg, workers=None)

    return hashlib.sha256(msgspec.json.encode(canonical)).hexdigest()
