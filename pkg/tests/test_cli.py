import csv

import numpy as np
import pytest

from sprinter import cli, core, simulate
from sprinter.design import Dataset
from sprinter.io import files, json


@pytest.fixture(autouse=True)
def no_signals(mocker):
    mocker.patch("sprinter.core.install_signals")


@pytest.fixture
def gaussian_data(tmp_path):
    prefix = str(tmp_path / "g")

    assert cli.main(
        [
            "simulate",
            "--family", "gaussian",
            "--n", "100",
            "--p", "12",
            "--n-eval", "50",
            "--seed", "4",
            "--out", prefix,
        ]
    ) == 0  # fmt: skip

    return prefix


def _rows(path) -> list:
    with open(path, newline="") as fp:
        return list(csv.reader(fp))


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--n", "100", "--p", "150", "--seed", "9"]

    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b")]) == 0

    first = (tmp_path / "a.train.csv").read_bytes()

    assert first == (tmp_path / "b.train.csv").read_bytes()

    rows = _rows(tmp_path / "a.train.csv")

    assert len(rows) == 101
    assert all(len(row) == 151 for row in rows)
    assert rows[0][0] == "x1" and rows[0][-1] == "y"


def test_fit_then_predict(tmp_path, capsys, gaussian_data):
    model_path = str(tmp_path / "m.json")

    assert cli.main(
        [
            "fit",
            "--data", f"{gaussian_data}.train.csv",
            "--family", "gaussian",
            "--cv", "3",
            "--out", model_path,
        ]
    ) == 0  # fmt: skip

    summary = json.loads(capsys.readouterr().out.encode())

    assert summary["family"] == "gaussian"
    assert summary["screened"] == 21
    assert summary["degenerate"] is False

    pred_path = str(tmp_path / "pred.csv")

    assert cli.main(
        [
            "predict",
            "--model", model_path,
            "--data", f"{gaussian_data}.eval.csv",
            "--out", pred_path,
        ]
    ) == 0  # fmt: skip

    printed = json.loads(capsys.readouterr().out.encode())
    model, _ = files.load_model(model_path)
    held = files.read_dataset(f"{gaussian_data}.eval.csv", family="gaussian")
    expected = simulate.evaluate(model, held)

    assert printed["deviance"] == pytest.approx(expected.deviance, rel=1e-12)
    assert printed["auc"] is None
    assert len(_rows(pred_path)) == 51


def test_fit_is_byte_reproducible(tmp_path, gaussian_data):
    outs = [str(tmp_path / "a.json"), str(tmp_path / "b.json")]

    for out in outs:
        assert cli.main(
            [
                "fit",
                "--data", f"{gaussian_data}.train.csv",
                "--family", "gaussian",
                "--cv", "3",
                "--out", out,
            ]
        ) == 0  # fmt: skip

    with open(outs[0], "rb") as a, open(outs[1], "rb") as b:
        assert a.read() == b.read()


def test_screen_with_automatic_m(tmp_path, gaussian_data):
    out = tmp_path / "screen.csv"

    assert cli.main(
        [
            "screen",
            "--data", f"{gaussian_data}.train.csv",
            "--family", "gaussian",
            "--m", "auto",
            "--cv", "3",
            "--out", str(out),
        ]
    ) == 0  # fmt: skip

    rows = _rows(out)

    assert rows[0] == ["a", "b", "gamma_hat"]
    assert len(rows) == 22
    assert all(1 <= int(a) <= int(b) <= 12 for a, b, _ in rows[1:])


def test_huge_eta_fits_a_degenerate_model(tmp_path, capsys, gaussian_data):
    assert cli.main(
        [
            "fit",
            "--data", f"{gaussian_data}.train.csv",
            "--family", "gaussian",
            "--eta", "1e9",
            "--cv", "3",
            "--out", str(tmp_path / "m.json"),
        ]
    ) == 0  # fmt: skip

    summary = json.loads(capsys.readouterr().out.encode())

    assert summary["degenerate"] is True
    assert summary["interactions"] == 0


def test_missing_data_file_is_a_usage_error(tmp_path):
    code = cli.main(
        [
            "fit",
            "--data", str(tmp_path / "absent.csv"),
            "--family", "gaussian",
            "--out", str(tmp_path / "m.json"),
        ]
    )  # fmt: skip

    assert code == 2


def test_missing_cells_are_bad_data(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text("x1,x2,y\n1,nan,2\n")

    code = cli.main(
        [
            "fit",
            "--data", str(path),
            "--family", "gaussian",
            "--out", str(tmp_path / "m.json"),
        ]
    )  # fmt: skip

    assert code == 3


def test_response_outside_family_is_a_mismatch(tmp_path, rng):
    path = tmp_path / "two.csv"
    X = rng.standard_normal((20, 3))
    y = np.where(np.arange(20) % 2 == 0, 0.0, 2.0)
    files.write_dataset(str(path), Dataset(X=X, y=y))

    code = cli.main(
        [
            "fit",
            "--data", str(path),
            "--family", "binomial",
            "--out", str(tmp_path / "m.json"),
        ]
    )  # fmt: skip

    assert code == 5


def test_predict_with_wrong_width_is_a_mismatch(
    tmp_path, capsys, gaussian_data, rng
):
    model_path = str(tmp_path / "m.json")
    cli.main(
        [
            "fit",
            "--data", f"{gaussian_data}.train.csv",
            "--family", "gaussian",
            "--cv", "3",
            "--out", model_path,
        ]
    )  # fmt: skip

    narrow = tmp_path / "narrow.csv"
    files.write_dataset(
        str(narrow), Dataset(X=rng.standard_normal((5, 4)), y=np.zeros(5))
    )

    code = cli.main(
        [
            "predict",
            "--model", model_path,
            "--data", str(narrow),
            "--out", str(tmp_path / "p.csv"),
        ]
    )  # fmt: skip

    assert code == 5


def test_bad_worker_count_is_a_usage_error(monkeypatch, tmp_path):
    monkeypatch.setenv("SPRINTER_WORKERS", "many")

    code = cli.main(
        ["simulate", "--n", "10", "--p", "20", "--out", str(tmp_path / "d")]
    )

    assert code == 2


def test_argument_errors_exit_with_usage_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["fit", "--family", "gaussian"])

    assert exc.value.code == 2


def test_benchmark_writes_one_row(tmp_path, capsys):
    out = tmp_path / "bench.csv"

    assert cli.main(
        [
            "benchmark",
            "--methods", "mel",
            "--family", "gaussian",
            "--p-list", "15",
            "--n", "60",
            "--reps", "1",
            "--out", str(out),
        ]
    ) == 0  # fmt: skip

    rows = _rows(out)

    assert rows[0] == [
        "method", "p", "rep", "seconds", "deviance", "auc"
    ]  # fmt: skip
    assert len(rows) == 2
    assert rows[1][0] == "mel" and rows[1][3] != "nan"
    assert "mel" in capsys.readouterr().out


def test_oracle_report(tmp_path, capsys):
    out = tmp_path / "oracle.json"

    assert cli.main(
        [
            "oracle",
            "--p", "3",
            "--n-grid", "200,400",
            "--seeds", "2",
            "--json", str(out),
        ]
    ) == 0  # fmt: skip

    assert "slope" in capsys.readouterr().out
    assert json.loads(out.read_bytes())["n_grid"] == [200, 400]


def test_interrupt_exits_130(mocker, tmp_path):
    mocker.patch("sprinter.cli.cmd_simulate", side_effect=core.Stopping)

    code = cli.main(
        ["simulate", "--n", "10", "--p", "20", "--out", str(tmp_path / "d")]
    )

    assert code == 130
