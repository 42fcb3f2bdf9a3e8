"""
Timing and accuracy comparison of sprinter against the baselines over a grid
of dimensions and replicates of a simulated design.
"""

from dataclasses import asdict, dataclass
import math
import time
import typing as t

import numpy as np

from sprinter import baselines, context, errors, logging, pipeline, simulate
from sprinter.config import SprinterConfig
from sprinter.design import Dataset
from sprinter.io import files, json

__all__ = (
    "METHODS",
    "BenchmarkRow",
    "SummaryRow",
    "run_benchmark",
    "summarize",
    "write_results",
)


Method = t.Literal["sprinter", "mel", "apl", "sis"]
METHODS: t.Tuple[Method, ...] = ("sprinter", "mel", "apl", "sis")

COLUMNS = ("method", "p", "rep", "seconds", "deviance", "auc")

logger = logging.get_logger(__name__)


@dataclass(frozen=True, kw_only=True)
class BenchmarkRow:
    method: str
    p: int
    rep: int
    # wall time of the fit only
    seconds: float
    # mean deviance on the evaluation set, NaN when the cell was skipped
    deviance: float
    # NaN for non-binomial families
    auc: float

    @property
    def skipped(self) -> bool:
        return math.isnan(self.seconds)

    def to_json(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    def values(self) -> t.List[t.Any]:
        return [getattr(self, name) for name in COLUMNS]


@dataclass(frozen=True, kw_only=True)
class SummaryRow:
    method: str
    p: int
    reps: int
    seconds_mean: float
    seconds_sd: float
    deviance_mean: float
    deviance_sd: float
    auc_mean: float
    auc_sd: float

    def to_json(self) -> t.Dict[str, t.Any]:
        return asdict(self)


def _replicate_seed(seed: int, p: int, rep: int) -> int:
    return int(np.random.SeedSequence((seed, p, rep)).generate_state(1)[0])


def _fit(
    method: Method,
    data: Dataset,
    cfg: SprinterConfig,
    ctx: context.Context,
) -> simulate.Predictor:
    family = cfg.family

    match method:
        case "sprinter":
            return pipeline.sprinter_fit(family, data.X, data.y, cfg, ctx)
        case "mel":
            return baselines.fit_mel(
                family,
                data.X,
                data.y,
                cv_folds=cfg.cv_folds,
                seed=cfg.seed,
                cfg=cfg.solver,
                ctx=ctx,
            )
        case "apl":
            return baselines.fit_apl(
                family,
                data.X,
                data.y,
                cv_folds=cfg.cv_folds,
                seed=cfg.seed,
                p_cap=cfg.p_cap,
                squares=cfg.screen.squares,
                cfg=cfg.solver,
                ctx=ctx,
            )
        case "sis":
            return baselines.fit_sis(
                family,
                data.X,
                data.y,
                cv_folds=cfg.cv_folds,
                seed=cfg.seed,
                cfg=cfg.solver,
                screen_cfg=cfg.screen,
                ctx=ctx,
            )

    raise errors.UsageError(f"unknown method: {method!r}")


def run_benchmark(
    methods: t.Sequence[str],
    p_list: t.Sequence[int],
    reps: int,
    n: int = 100,
    structure: simulate.Structure = "mixed",
    beta: float = 1.0,
    gamma: float = 4.0,
    seed: int = 0,
    cfg: SprinterConfig | None = None,
    ctx: context.Context | None = None,
) -> t.List[BenchmarkRow]:
    """
    Every method on every (p, replicate) cell. Methods within a replicate
    see the same training and evaluation data. All-pairs lasso cells above
    `cfg.p_cap` are not run; their rows carry NaN timings and scores.
    """
    ctx = context.ensure(ctx)
    cfg = cfg or SprinterConfig(family="binomial")

    if cfg.family == "ordinal":
        raise errors.UsageError("the benchmark runs GLM families only")

    unknown = [m for m in methods if m not in METHODS]

    if unknown:
        raise errors.UsageError(f"unknown methods: {', '.join(unknown)}")

    if reps < 1:
        raise errors.UsageError("at least one replicate is needed")

    rows: t.List[BenchmarkRow] = []

    for p in p_list:
        for rep in range(reps):
            ctx.maybe_stop()

            design = simulate.SimDesign(
                family=cfg.family,
                n=n,
                p=p,
                structure=structure,
                beta_value=beta,
                gamma_value=gamma,
                seed=_replicate_seed(seed, p, rep),
            )
            train, held = simulate.simulate(design)
            log = logger.bind(p=p, rep=rep)

            for method in t.cast(t.Sequence[Method], methods):
                if method == "apl" and p > cfg.p_cap:
                    log.warning(
                        "benchmark.skipped",
                        method=method,
                        p_cap=cfg.p_cap,
                    )
                    rows.append(
                        BenchmarkRow(
                            method=method,
                            p=p,
                            rep=rep,
                            seconds=math.nan,
                            deviance=math.nan,
                            auc=math.nan,
                        )
                    )

                    continue

                start = time.perf_counter()
                model = _fit(method, train, cfg, ctx)
                seconds = time.perf_counter() - start

                result = simulate.evaluate(model, held)
                log.info(
                    "benchmark.cell",
                    method=method,
                    seconds=round(seconds, 4),
                    deviance=result.mean_deviance,
                )

                rows.append(
                    BenchmarkRow(
                        method=method,
                        p=p,
                        rep=rep,
                        seconds=seconds,
                        deviance=result.mean_deviance,
                        auc=math.nan if result.auc is None else result.auc,
                    )
                )

    return rows


def _mean_sd(values: t.Sequence[float]) -> t.Tuple[float, float]:
    if not values:
        return math.nan, math.nan

    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0

    return float(arr.mean()), sd


def summarize(rows: t.Sequence[BenchmarkRow]) -> t.List[SummaryRow]:
    """
    Mean and standard deviation per (method, p) over completed cells.
    """
    cells: t.Dict[t.Tuple[str, int], t.List[BenchmarkRow]] = {}

    for row in rows:
        if not row.skipped:
            cells.setdefault((row.method, row.p), []).append(row)

    ret = []

    for (method, p), group in cells.items():
        seconds = _mean_sd([r.seconds for r in group])
        deviance = _mean_sd([r.deviance for r in group])
        auc = _mean_sd([r.auc for r in group if not math.isnan(r.auc)])

        ret.append(
            SummaryRow(
                method=method,
                p=p,
                reps=len(group),
                seconds_mean=seconds[0],
                seconds_sd=seconds[1],
                deviance_mean=deviance[0],
                deviance_sd=deviance[1],
                auc_mean=auc[0],
                auc_sd=auc[1],
            )
        )

    return ret


def write_results(
    rows: t.Sequence[BenchmarkRow],
    csv_path: str,
    json_path: str | None = None,
) -> None:
    files.write_csv(csv_path, COLUMNS, (row.values() for row in rows))

    if json_path is None:
        return

    payload = {
        "rows": list(rows),
        "summary": summarize(rows),
    }

    try:
        with open(json_path, "wb") as fp:
            fp.write(json.dumps(payload, indent=2))
            fp.write(b"\n")
    except OSError as e:
        raise errors.UsageError(f"cannot write {json_path}: {e}") from e
