from concurrent import futures
import contextlib
import signal
import threading
import typing as t

from sprinter import errors, logging


P = t.ParamSpec("P")
T = t.TypeVar("T")


class Stopping(Exception):
    """
    Raised when the process is stopping but there is no error.

    Long running loops (screening chunks, CV folds, Monte Carlo batches) check
    the stopping event between units of work. See `error_boundary`.
    """


@contextlib.contextmanager
def error_boundary(
    name: str,
    stopping: threading.Event,
    logger: logging.Logger,
    raise_: bool = False,
) -> t.Iterator[logging.Logger]:
    """
    Context manager that sets the stopping event when the body fails.

    Library errors are logged as a single event carrying their exit code,
    anything else with its traceback. `Stopping` is not logged at all.

    :param name: The name of the context.
    :param stopping: The stopping event.
    :param logger: The logger to use.
    :param raise_: Re-raise the error after logging it.
    """
    log = logger.bind(error_boundary=name)

    log.debug("start")

    try:
        yield log
    except BaseException as err:
        if not stopping.is_set():
            stopping.set()

        match err:
            case Stopping():
                pass
            case errors.SprinterError():
                log.error(
                    "failed",
                    error=type(err).__name__,
                    reason=str(err),
                    exit_code=err.exit_code,
                )
            case _:
                log.exception("error")

        if raise_:
            raise
    finally:
        log.debug("stop")


def install_signals(
    stopping: threading.Event,
    logger: logging.Logger,
) -> t.Callable[[], None]:
    """
    Route SIGINT and SIGTERM to the stopping event. A second signal raises
    KeyboardInterrupt, for work stuck inside a long numerical call.

    Returns a function that puts the previous handlers back.
    """
    previous = {
        sig: signal.getsignal(sig) for sig in (signal.SIGINT, signal.SIGTERM)
    }

    def shutdown(num: int, _frame: t.Any) -> None:
        if stopping.is_set():
            logger.warning("shutdown.forced", num=num)

            raise KeyboardInterrupt

        logger.info("shutdown.signal", num=num)

        stopping.set()

    for sig in previous:
        signal.signal(sig, shutdown)

    def restore() -> None:
        for sig, handler in previous.items():
            signal.signal(sig, handler)

    return restore


def chunk_ranges(total: int, parts: int) -> t.List[t.Tuple[int, int]]:
    """
    Split `range(total)` into at most `parts` contiguous, non-empty
    `(start, stop)` ranges of near equal size.
    """
    parts = max(1, min(parts, total))

    if total <= 0:
        return []

    bounds = [(total * i) // parts for i in range(parts + 1)]

    return [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]


class ThreadPoolExecutor(futures.ThreadPoolExecutor):
    """
    Runs every submitted task inside an error boundary, so that the first
    failing chunk or fold stops the tasks that have not started yet.
    """

    stopping: threading.Event
    log: logging.Logger

    def __init__(
        self,
        stopping: threading.Event,
        log: logging.Logger,
        *args: t.Any,
        **kwargs: t.Any,
    ) -> None:
        super().__init__(*args, **kwargs)

        self.stopping = stopping
        self.log = log

    def submit(  # type: ignore[override]
        self,
        fn: t.Callable[P, T],
        *args: P.args,
        **kwargs: P.kwargs,
    ) -> "futures.Future[T]":
        name = getattr(fn, "__qualname__", repr(fn))

        def task() -> T:
            if self.stopping.is_set():
                raise Stopping

            with error_boundary(name, self.stopping, self.log, raise_=True):
                ret = fn(*args, **kwargs)

            if self.stopping.is_set():
                raise Stopping

            return ret

        return super().submit(task)
