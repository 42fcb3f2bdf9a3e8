"""
Micro-benchmarks for the screening scan and the ordinal score and
information.
"""

from dataclasses import asdict, dataclass
import resource
import sys
import time
import tracemalloc
import typing as t

import numpy as np

from sprinter import context, design, logging, ordinal
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import ScreenConfig
from sprinter.families import get_family
from sprinter.io import json

__all__ = (
    "ScreenThroughput",
    "ScoreInfoTiming",
    "bench_screen_throughput",
    "bench_ordinal_score_info",
    "emit",
)


logger = logging.get_logger(__name__)


@dataclass(frozen=True, kw_only=True)
class ScreenThroughput:
    kernel: str = "screen"
    family: str
    n: int
    p: int
    workers: int
    m: int
    candidates: int
    seconds: float
    pairs_per_second: float
    # largest traced numpy allocation during the scan
    peak_traced_bytes: int
    # the same bound expressed in doubles, compare against n * p + m
    peak_traced_doubles: int
    max_rss_bytes: int

    def to_json(self) -> t.Dict[str, t.Any]:
        return asdict(self)


@dataclass(frozen=True, kw_only=True)
class ScoreInfoTiming:
    kernel: str = "ordinal_score_info"
    n: int
    p: int
    k: int
    structured_seconds: float
    naive_seconds: float
    speedup: float
    max_abs_difference: float

    def to_json(self) -> t.Dict[str, t.Any]:
        return asdict(self)


def _max_rss() -> int:
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss

    # kilobytes on linux, bytes on darwin
    return rss if sys.platform == "darwin" else rss * 1024


def bench_screen_throughput(
    n: int,
    p: int,
    family: str = "binomial",
    workers: int = 1,
    m: int | None = None,
    seed: int = 0,
    cfg: ScreenConfig | None = None,
) -> ScreenThroughput:
    """
    Time one screening scan over synthetic standard normal features with a
    zero offset. Memory is traced only while the scan runs, after the data
    has been drawn.
    """
    fam = get_family(family)
    cfg = cfg or ScreenConfig()
    rng = np.random.default_rng(seed)

    X = rng.standard_normal((n, p))
    theta = X[:, 0] + X[:, 1] * X[:, 2]

    match fam.kind:
        case "gaussian":
            y = theta + rng.standard_normal(n)
        case "binomial":
            y = rng.binomial(1, fam.mean(theta)).astype(np.float64)
        case "poisson":
            y = rng.poisson(fam.mean(np.minimum(theta, 5.0))).astype(
                np.float64
            )

    Xs, _ = design.standardize(X)
    ctx = context.default(workers=workers)
    m = m or screening.default_m(n)

    tracemalloc.start()

    try:
        start = time.perf_counter()
        res = screening.screen(fam, Xs, y, m=m, cfg=cfg, ctx=ctx)
        seconds = time.perf_counter() - start
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()

    ret = ScreenThroughput(
        family=fam.kind,
        n=n,
        p=p,
        workers=ctx.workers,
        m=m,
        candidates=res.n_scanned,
        seconds=seconds,
        pairs_per_second=res.n_scanned / max(seconds, 1e-12),
        peak_traced_bytes=peak,
        peak_traced_doubles=peak // 8,
        max_rss_bytes=_max_rss(),
    )

    logger.info(
        "bench.screen",
        p=p,
        workers=ctx.workers,
        pairs_per_second=round(ret.pairs_per_second),
    )

    return ret


def bench_ordinal_score_info(
    n: int,
    p: int,
    k: int,
    seed: int = 0,
) -> ScoreInfoTiming:
    """
    Time the structured score and information against the observation by
    observation sum on the same random instance.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    b = rng.normal(scale=0.1, size=p)
    c = np.sort(rng.normal(size=k))
    y = rng.integers(1, k + 2, size=n)

    start = time.perf_counter()
    fast = ordinal.ordinal_score_info(X, y, c, b)
    structured = time.perf_counter() - start

    start = time.perf_counter()
    slow = ordinal.ordinal_score_info_naive(X, y, c, b)
    naive = time.perf_counter() - start

    diff = max(
        float(np.max(np.abs(fast.score - slow.score))),
        float(np.max(np.abs(fast.dense() - slow.dense()))),
    )

    return ScoreInfoTiming(
        n=n,
        p=p,
        k=k,
        structured_seconds=structured,
        naive_seconds=naive,
        speedup=naive / max(structured, 1e-12),
        max_abs_difference=diff,
    )


def emit(
    results: t.Iterable[t.Any],
    out: t.IO[bytes] | None = None,
) -> None:
    """
    Write results as JSON lines.
    """
    out = out or sys.stdout.buffer

    for result in results:
        out.write(json.dumps(result))
        out.write(b"\n")

    out.flush()
