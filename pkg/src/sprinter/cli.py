"""
Command line entry point.

    sprinter simulate   --family binomial --n 100 --p 150 --out data
    sprinter fit        --data data.train.csv --family binomial --out m.json
    sprinter screen     --data data.train.csv --family binomial --out s.csv
    sprinter predict    --model m.json --data data.eval.csv --out pred.csv
    sprinter benchmark  --methods sprinter,mel,apl,sis --p-list 150,500
    sprinter oracle     --p 6 --n-grid 500,1000,2000,4000
    sprinter bench-screen --n 100 --p 1000,2000 --workers 8

Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical failure, 5 model and
data mismatch, 130 interrupted.
"""

import argparse
import sys
import threading
import typing as t

import msgspec
import numpy as np

from sprinter import (
    baselines,
    bench,
    benchmark,
    config,
    context,
    core,
    errors,
    logging,
    ordinal,
    oracles,
    penalized,
    pipeline,
    simulate,
)
import importlib

screening = importlib.import_module("sprinter.screen")
from sprinter.config import SprinterConfig
from sprinter.design import Dataset, standardize
from sprinter.families import get_family
from sprinter.io import files, json

__all__ = ("main",)


logger = logging.get_logger(__name__)

FAMILIES = ("gaussian", "binomial", "poisson", "ordinal")
STRUCTURES = ("mixed", "hierarchical", "anti_hierarchical", "anti")

Handler = t.Callable[[argparse.Namespace, context.Context], int]


def _ints(value: str) -> t.List[int]:
    try:
        return [int(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma separated integers, got {value!r}"
        ) from None


def _floats(value: str) -> t.List[float]:
    try:
        return [float(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma separated numbers, got {value!r}"
        ) from None


def _m(value: str) -> int | None:
    if value == "auto":
        return None

    try:
        m = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--m takes 'auto' or an integer, got {value!r}"
        ) from None

    if m < 1:
        raise argparse.ArgumentTypeError("--m must be at least 1")

    return m


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--family", choices=FAMILIES, required=True)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument(
        "--m",
        type=_m,
        default=None,
        help="interactions kept by screening: 'auto' or an integer",
    )
    parser.add_argument(
        "--eta",
        type=float,
        default=None,
        help="keep every |gamma| above this instead of the top m",
    )
    parser.add_argument("--cv", type=int, default=None, help="folds")
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--no-squares",
        action="store_true",
        help="exclude squared main effects from the candidates",
    )


def _config(args: argparse.Namespace) -> SprinterConfig:
    """
    Defaults, then the config file, then SPRINTER_WORKERS, then flags.
    """
    cfg = config.load(args.config) if getattr(args, "config", None) else None
    cfg = config.from_env(cfg or SprinterConfig())

    replace = msgspec.structs.replace
    screen_cfg = cfg.screen
    solver_cfg = cfg.solver

    if getattr(args, "family", None):
        cfg = replace(cfg, family=args.family)

    if getattr(args, "m", None) is not None:
        screen_cfg = replace(screen_cfg, m=args.m)

    if getattr(args, "eta", None) is not None:
        screen_cfg = replace(screen_cfg, eta=args.eta)

    if getattr(args, "no_squares", False):
        screen_cfg = replace(screen_cfg, squares=False)

    if getattr(args, "alpha", None) is not None:
        solver_cfg = replace(solver_cfg, alpha=args.alpha)

    if getattr(args, "cv", None) is not None:
        cfg = replace(cfg, cv_folds=args.cv)

    if getattr(args, "tuning", None):
        cfg = replace(cfg, tuning=args.tuning)

    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)

    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)

    return replace(cfg, screen=screen_cfg, solver=solver_cfg)


def _print_json(obj: t.Any) -> None:
    sys.stdout.buffer.write(json.dumps(obj))
    sys.stdout.buffer.write(b"\n")
    sys.stdout.flush()


def cmd_simulate(args: argparse.Namespace, ctx: context.Context) -> int:
    train: Dataset
    held: Dataset

    if args.family == "ordinal":
        train, held = simulate.simulate_ordinal(
            simulate.OrdinalDesign(
                n=args.n,
                p=args.p,
                structure=args.structure,
                beta_value=args.beta,
                gamma_value=args.gamma,
                cutpoints=tuple(args.cutpoints),
                seed=args.seed,
                n_eval=args.n_eval or 1000,
            )
        )
    else:
        train, held = simulate.simulate(
            simulate.SimDesign(
                family=args.family,
                n=args.n,
                p=args.p,
                structure=args.structure,
                beta_value=args.beta,
                gamma_value=args.gamma,
                x_variance=args.x_var,
                seed=args.seed,
                n_eval=args.n_eval,
                noise_sd=args.noise_sd,
            )
        )

    files.write_dataset(f"{args.out}.train.csv", train)
    files.write_dataset(f"{args.out}.eval.csv", held)

    ctx.log.info("simulate.done", train=train.n, eval=held.n, p=train.p)

    return 0


def _fit_model(
    method: str,
    data: Dataset,
    cfg: SprinterConfig,
    ctx: context.Context,
) -> t.Any:
    if cfg.family == "ordinal":
        if method != "sprinter":
            raise errors.UsageError("ordinal responses are fitted by sprinter")

        return ordinal.sprinter_ordinal(data.X, data.y, cfg, ctx)

    match method:
        case "sprinter":
            return pipeline.sprinter_fit(cfg.family, data.X, data.y, cfg, ctx)
        case "mel":
            fit = baselines.fit_mel(
                cfg.family,
                data.X,
                data.y,
                cv_folds=cfg.cv_folds,
                seed=cfg.seed,
                cfg=cfg.solver,
                ctx=ctx,
            )
            _, std = standardize(data.X)

            return pipeline.combine(fit, [], std)
        case "apl":
            return baselines.fit_apl(
                cfg.family,
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
                cfg.family,
                data.X,
                data.y,
                cv_folds=cfg.cv_folds,
                seed=cfg.seed,
                cfg=cfg.solver,
                screen_cfg=cfg.screen,
                ctx=ctx,
            )

    raise errors.UsageError(f"unknown method: {method!r}")


def cmd_fit(args: argparse.Namespace, ctx: context.Context) -> int:
    cfg = t.cast(SprinterConfig, ctx.cfg)
    data = files.read_dataset(args.data, family=cfg.family)

    model = _fit_model(args.method, data, cfg, ctx)
    doc = files.to_model_file(
        model,
        seed=cfg.seed,
        config_hash=config.config_hash(cfg),
        stamp=args.stamp,
    )
    files.save_model(args.out, doc)

    _print_json(
        {
            "family": doc.family,
            "main_effects": len(doc.main_coefs),
            "interactions": len(doc.interactions),
            "screened": len(getattr(model, "screen", None) or ()),
            "degenerate": doc.degenerate,
        }
    )

    return 0


def cmd_screen(args: argparse.Namespace, ctx: context.Context) -> int:
    """
    Steps 1 to 3 only: the cross-validated main-effects fit and the
    interactions it lets through.
    """
    cfg = t.cast(SprinterConfig, ctx.cfg)
    data = files.read_dataset(args.data, family=cfg.family)
    Xs, _ = standardize(data.X)

    if cfg.family == "ordinal":
        fit1 = ordinal.fit_ordinalnet(
            data.X,
            data.y,
            cv_folds=cfg.cv_folds,
            seed=cfg.seed,
            cfg=cfg.solver,
            ctx=ctx,
        ).best
        codes, _ = ordinal.categories(data.y)
        offset = fit1.linear_predictor(data.X)
        res = screening.screen(
            None,
            Xs,
            data.y,
            offset,
            cfg=cfg.screen,
            ctx=ctx,
            kernel=ordinal.ordinal_kernel(
                codes, offset, fit1.cutpoints, cfg.screen
            ),
        )
    else:
        family = get_family(cfg.family)
        glm = penalized.cv_fit(
            family,
            data.X,
            data.y,
            n_folds=cfg.cv_folds,
            seed=cfg.seed,
            cfg=cfg.solver,
            ctx=ctx,
        ).best
        res = screening.screen(
            family,
            Xs,
            data.y,
            glm.linear_predictor(data.X),
            cfg=cfg.screen,
            ctx=ctx,
        )

    files.write_screen(args.out, res)

    ctx.log.info("screen.written", selected=len(res), scanned=res.n_scanned)

    return 0


def cmd_predict(args: argparse.Namespace, ctx: context.Context) -> int:
    model, doc = files.load_model(args.model)
    data = files.read_dataset(args.data)

    if data.p != doc.n_features:
        raise errors.DimensionError(
            f"model has {doc.n_features} main effects, data has {data.p}"
        )

    if isinstance(model, ordinal.OrdinalInteractionModel):
        result = ordinal.evaluate_ordinal(model, data.X, data.y)
    else:
        result = simulate.evaluate(model, data)

    files.write_predictions(args.out, model, data.X)
    _print_json(result)

    return 0


def cmd_benchmark(args: argparse.Namespace, ctx: context.Context) -> int:
    cfg = t.cast(SprinterConfig, ctx.cfg)
    rows = benchmark.run_benchmark(
        args.methods.split(","),
        args.p_list,
        args.reps,
        n=args.n,
        structure=args.structure,
        beta=args.beta,
        gamma=args.gamma,
        seed=cfg.seed,
        cfg=cfg,
        ctx=ctx,
    )
    benchmark.write_results(rows, args.out, args.json)

    for row in benchmark.summarize(rows):
        print(
            f"{row.method:>9} p={row.p:<6} "
            f"seconds {row.seconds_mean:.3f}±{row.seconds_sd:.3f}  "
            f"deviance {row.deviance_mean:.4f}±{row.deviance_sd:.4f}  "
            f"auc {row.auc_mean:.4f}±{row.auc_sd:.4f}"
        )

    return 0


def cmd_oracle(args: argparse.Namespace, ctx: context.Context) -> int:
    """
    Convergence of the empirical screening utilities towards their
    population values in a correlated gaussian design with one planted
    interaction.
    """
    p = args.p

    if p < 2:
        raise errors.UsageError("the oracle design needs p >= 2")

    idx = np.arange(p)
    cov = args.rho ** np.abs(idx[:, None] - idx[None, :])
    beta = np.zeros(p)
    beta[:2] = 1.0

    spec = oracles.PopulationSpec(
        family="gaussian",
        beta_star=beta,
        gamma_star=((0, 1, args.gamma),),
        cov=cov,
    )
    report = oracles.empirical_convergence_check(
        spec,
        n_grid=args.n_grid,
        seeds=args.seeds,
        kappa=args.kappa,
        eta0=args.eta0,
        seed=args.seed,
        ctx=ctx,
    )

    print(report.to_table())

    if args.json:
        with open(args.json, "wb") as fp:
            fp.write(json.dumps(report, indent=2))
            fp.write(b"\n")

    return 0


def cmd_bench_screen(args: argparse.Namespace, ctx: context.Context) -> int:
    results: t.List[t.Any] = []

    for p in args.p:
        ctx.maybe_stop()
        results.append(
            bench.bench_screen_throughput(
                args.n,
                p,
                family=args.family,
                workers=ctx.workers,
                seed=args.seed,
            )
        )

    if args.ordinal:
        results.append(
            bench.bench_ordinal_score_info(
                args.ordinal_n, max(args.p), args.ordinal_k, seed=args.seed
            )
        )

    bench.emit(results)

    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sprinter",
        description="Sparse interaction screening in generalized linear models",
    )
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=("debug", "info", "warning", "error"),
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="threads for screening and cross-validation",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write training and evaluation CSVs")
    p.add_argument("--family", choices=FAMILIES, default="binomial")
    p.add_argument("--structure", choices=STRUCTURES, default="mixed")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=4.0)
    p.add_argument("--x-var", type=float, default=None)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument(
        "--cutpoints",
        type=_floats,
        default=[-2.0, -0.7, 0.7, 2.0],
        help="ordinal only",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--out",
        required=True,
        help="prefix, writes PREFIX.train.csv and PREFIX.eval.csv",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    _add_model_flags(p)
    p.add_argument(
        "--method",
        choices=benchmark.METHODS,
        default="sprinter",
    )
    p.add_argument("--tuning", choices=("joint", "sequential"), default=None)
    p.add_argument(
        "--stamp",
        action="store_true",
        help="record the fit time in the model file",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("screen", help="write the screened interactions")
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("predict", help="write one fitted mean per row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="compare methods over a grid of p")
    p.add_argument("--methods", default=",".join(benchmark.METHODS))
    p.add_argument(
        "--family",
        choices=("gaussian", "binomial", "poisson"),
        default="binomial",
    )
    p.add_argument("--structure", choices=STRUCTURES, default="mixed")
    p.add_argument("--p-list", type=_ints, default=[150, 500])
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default="benchmark.csv")
    p.add_argument("--json", default=None, help="summary JSON")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help="screening convergence report")
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument(
        "--n-grid", type=_ints, default=[500, 1000, 2000, 4000, 8000]
    )
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--kappa", type=float, default=0.25)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench-screen", help="screening throughput")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=_ints, default=[1000, 2000])
    p.add_argument(
        "--family",
        choices=("gaussian", "binomial", "poisson"),
        default="binomial",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--ordinal",
        action="store_true",
        help="also time the ordinal score and information",
    )
    p.add_argument("--ordinal-n", type=int, default=5000)
    p.add_argument("--ordinal-k", type=int, default=4)
    p.set_defaults(func=cmd_bench_screen)

    return parser


def main(argv: t.Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.configure(level=logging.level_from_name(args.log_level))

    stopping = threading.Event()
    log = logger.bind(command=args.command)

    try:
        cfg = _config(args)
        workers = cfg.workers or context.available_workers()
    except errors.SprinterError as e:
        log.error("config.invalid", error=str(e))

        return e.exit_code

    ctx = context.Context(
        stopping=stopping,
        log=log,
        cfg=cfg,
        workers=max(1, workers),
    )
    handler = t.cast(Handler, args.func)
    restore = None

    if threading.current_thread() is threading.main_thread():
        restore = core.install_signals(stopping, log)

    with logging.context(command=args.command, seed=cfg.seed):
        try:
            with core.error_boundary(args.command, stopping, log, raise_=True):
                return handler(args, ctx)
        except core.Stopping:
            return 130
        except errors.SprinterError as e:
            return e.exit_code
        finally:
            if restore is not None:
                restore()


if __name__ == "__main__":
    sys.exit(main())
