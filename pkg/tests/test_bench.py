import io

import pytest

from sprinter import bench
from sprinter.io import json


def test_screen_throughput_record():
    res = bench.bench_screen_throughput(40, 30, family="gaussian", m=5)

    assert res.candidates == 30 * 31 // 2
    assert res.m == 5
    assert res.workers == 1
    assert res.pairs_per_second > 0.0
    assert res.peak_traced_doubles == res.peak_traced_bytes // 8


def test_default_m_follows_rows():
    res = bench.bench_screen_throughput(100, 20, family="poisson")

    assert res.m == 21


def test_score_info_timing_agrees():
    res = bench.bench_ordinal_score_info(200, 6, 3)

    assert res.max_abs_difference < 1e-8
    assert res.speedup > 0.0


def test_emit_writes_json_lines():
    out = io.BytesIO()
    results = [
        bench.bench_ordinal_score_info(50, 3, 2),
        bench.bench_ordinal_score_info(50, 4, 2),
    ]

    bench.emit(results, out)
    lines = out.getvalue().splitlines()

    assert len(lines) == 2
    assert json.loads(lines[1])["p"] == 4
    assert json.loads(lines[0])["kernel"] == "ordinal_score_info"


@pytest.mark.bench
def test_screen_memory_stays_linear():
    n, p, m = 100, 2000, 21
    res = bench.bench_screen_throughput(n, p, m=m)

    # a bounded number of product blocks, never the n x q matrix
    assert res.peak_traced_doubles < 4 * (n * p + m) + 32 * 262144
    assert res.peak_traced_doubles < n * res.candidates // 4


@pytest.mark.bench
def test_screen_scales_with_workers():
    one = bench.bench_screen_throughput(100, 1000, workers=1)
    four = bench.bench_screen_throughput(100, 1000, workers=4)

    assert four.seconds < one.seconds


@pytest.mark.bench
def test_structured_score_info_is_much_faster():
    res = bench.bench_ordinal_score_info(5000, 50, 4)

    assert res.speedup >= 10.0
