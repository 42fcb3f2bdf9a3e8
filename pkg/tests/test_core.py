import signal
import threading

import pytest

from sprinter import core, errors


@pytest.mark.parametrize(
    "total,parts,expected",
    [
        (10, 3, [(0, 3), (3, 6), (6, 10)]),
        (2, 5, [(0, 1), (1, 2)]),
        (7, 1, [(0, 7)]),
        (0, 4, []),
    ],
)
def test_chunk_ranges(total, parts, expected):
    assert core.chunk_ranges(total, parts) == expected


def test_chunk_ranges_cover_everything_once():
    ranges = core.chunk_ranges(1001, 16)

    assert ranges[0][0] == 0
    assert ranges[-1][1] == 1001
    assert all(a[1] == b[0] for a, b in zip(ranges, ranges[1:]))
    assert all(hi > lo for lo, hi in ranges)


def test_error_boundary_sets_stopping_and_reraises(mocker):
    stopping = threading.Event()
    logger = mocker.Mock()

    with pytest.raises(ValueError):
        with core.error_boundary("work", stopping, logger, raise_=True):
            raise ValueError("boom")

    assert stopping.is_set()
    logger.bind.return_value.exception.assert_called_once_with("error")


def test_error_boundary_swallows_without_raise(mocker):
    stopping = threading.Event()

    with core.error_boundary("work", stopping, mocker.Mock()):
        raise RuntimeError("boom")

    assert stopping.is_set()


def test_error_boundary_does_not_log_stopping(mocker):
    stopping = threading.Event()
    logger = mocker.Mock()

    with core.error_boundary("work", stopping, logger):
        raise core.Stopping

    assert stopping.is_set()
    logger.bind.return_value.exception.assert_not_called()


def test_error_boundary_clean_exit_leaves_event_alone(mocker):
    stopping = threading.Event()

    with core.error_boundary("work", stopping, mocker.Mock()) as log:
        assert log is not None

    assert not stopping.is_set()


def test_thread_pool_failure_stops_other_work(mocker):
    stopping = threading.Event()

    def fail() -> None:
        raise KeyError("x")

    pool = core.ThreadPoolExecutor(stopping, mocker.Mock(), max_workers=1)

    with pool:
        with pytest.raises(KeyError):
            pool.submit(fail).result()

        assert stopping.is_set()

        with pytest.raises(core.Stopping):
            pool.submit(lambda: 1).result()


def test_thread_pool_returns_results(mocker):
    stopping = threading.Event()

    pool = core.ThreadPoolExecutor(stopping, mocker.Mock(), max_workers=2)

    with pool:
        futures = [pool.submit(pow, k, 2) for k in range(5)]

    assert [f.result() for f in futures] == [0, 1, 4, 9, 16]


def test_error_boundary_logs_library_errors_once(mocker):
    stopping = threading.Event()
    logger = mocker.Mock()

    with core.error_boundary("work", stopping, logger):
        raise errors.DimensionError("3 columns, expected 4")

    log = logger.bind.return_value
    log.exception.assert_not_called()
    log.error.assert_called_once_with(
        "failed",
        error="DimensionError",
        reason="3 columns, expected 4",
        exit_code=5,
    )


def test_install_signals_sets_stopping_and_restores(mocker):
    stopping = threading.Event()
    logger = mocker.Mock()
    before = signal.getsignal(signal.SIGTERM)

    restore = core.install_signals(stopping, logger)

    try:
        handler = signal.getsignal(signal.SIGTERM)

        assert callable(handler)

        handler(signal.SIGTERM, None)

        assert stopping.is_set()

        with pytest.raises(KeyboardInterrupt):
            handler(signal.SIGTERM, None)
    finally:
        restore()

    assert signal.getsignal(signal.SIGTERM) is before
