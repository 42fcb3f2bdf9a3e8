import csv
import math

import msgspec
import pytest

from sprinter import benchmark, errors
from sprinter.benchmark import BenchmarkRow
from sprinter.config import SolverConfig, SprinterConfig
from sprinter.io import json


@pytest.fixture
def small_cfg() -> SprinterConfig:
    return SprinterConfig(
        family="gaussian",
        solver=SolverConfig(n_lambda=20),
        cv_folds=3,
        p_cap=12,
    )


def test_apl_above_cap_is_skipped(small_cfg):
    rows = benchmark.run_benchmark(
        ["mel", "apl"], [11, 13], reps=1, n=50, cfg=small_cfg
    )

    skipped = {(row.method, row.p): row.skipped for row in rows}

    assert skipped == {
        ("mel", 11): False,
        ("apl", 11): False,
        ("mel", 13): False,
        ("apl", 13): True,
    }

    skipped = next(row for row in rows if row.skipped)

    assert math.isnan(skipped.seconds)
    assert math.isnan(skipped.deviance)


def test_skipped_cells_are_logged(mocker, small_cfg):
    log = mocker.patch("sprinter.benchmark.logger")

    benchmark.run_benchmark(["apl"], [13], reps=1, n=50, cfg=small_cfg)

    log.bind.return_value.warning.assert_called_once_with(
        "benchmark.skipped", method="apl", p_cap=12
    )


def test_rows_are_reproducible(small_cfg):
    first = benchmark.run_benchmark(["mel"], [11], reps=2, n=50, cfg=small_cfg)
    again = benchmark.run_benchmark(["mel"], [11], reps=2, n=50, cfg=small_cfg)

    assert [r.deviance for r in first] == [r.deviance for r in again]
    assert first[0].deviance != first[1].deviance
    assert all(math.isnan(r.auc) for r in first)


def test_binomial_rows_have_auc(small_cfg):
    cfg = msgspec.structs.replace(small_cfg, family="binomial")

    (row,) = benchmark.run_benchmark(["sis"], [11], reps=1, n=80, cfg=cfg)

    assert 0.0 <= row.auc <= 1.0


def test_argument_checks(small_cfg):
    with pytest.raises(errors.UsageError):
        benchmark.run_benchmark(["lasso"], [11], reps=1, cfg=small_cfg)

    with pytest.raises(errors.UsageError):
        benchmark.run_benchmark(["mel"], [11], reps=0, cfg=small_cfg)

    with pytest.raises(errors.UsageError):
        benchmark.run_benchmark(
            ["mel"],
            [11],
            reps=1,
            cfg=msgspec.structs.replace(small_cfg, family="ordinal"),
        )


def _row(method: str, rep: int, seconds: float):
    return BenchmarkRow(
        method=method,
        p=20,
        rep=rep,
        seconds=seconds,
        deviance=seconds * 2.0,
        auc=math.nan,
    )


def test_summarize():
    rows = [
        _row("mel", 0, 1.0),
        _row("mel", 1, 3.0),
        _row("apl", 0, math.nan),
    ]

    (mel,) = benchmark.summarize(rows)

    assert mel.method == "mel"
    assert mel.reps == 2
    assert mel.seconds_mean == pytest.approx(2.0)
    assert mel.seconds_sd == pytest.approx(math.sqrt(2.0))
    assert mel.deviance_mean == pytest.approx(4.0)
    assert math.isnan(mel.auc_mean)


def test_single_replicate_has_zero_spread():
    (mel,) = benchmark.summarize([_row("mel", 0, 1.5)])

    assert mel.seconds_sd == 0.0


def test_write_results(tmp_path):
    rows = [_row("mel", 0, 1.0), _row("apl", 0, math.nan)]
    csv_path = tmp_path / "rows.csv"
    json_path = tmp_path / "rows.json"

    benchmark.write_results(rows, str(csv_path), str(json_path))

    with open(csv_path, newline="") as fp:
        table = list(csv.reader(fp))

    assert table[0] == ["method", "p", "rep", "seconds", "deviance", "auc"]
    assert table[1][:3] == ["mel", "20", "0"]
    assert table[2] == ["apl", "20", "0", "nan", "nan", "nan"]

    payload = json.loads(json_path.read_bytes())

    assert len(payload["rows"]) == 2
    assert payload["summary"][0]["method"] == "mel"


@pytest.mark.slow
def test_sprinter_beats_all_pairs_on_time_and_deviance():
    """
    The default logistic design: sprinter should be faster than the all-pairs
    lasso at p = 150 and no worse in held-out deviance on average.
    """
    cfg = SprinterConfig(family="binomial")

    rows = benchmark.run_benchmark(["sprinter", "apl"], [150], reps=3, cfg=cfg)
    summary = {row.method: row for row in benchmark.summarize(rows)}

    assert summary["sprinter"].seconds_mean < summary["apl"].seconds_mean
    assert (
        summary["sprinter"].deviance_mean
        <= summary["apl"].deviance_mean + summary["apl"].deviance_sd
    )
