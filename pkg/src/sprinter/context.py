from dataclasses import dataclass
import os
import sys
import threading
import typing as t

from sprinter import core, logging


Config = t.TypeVar("Config")
T = t.TypeVar("T")
R = t.TypeVar("R")


def available_workers() -> int:
    """
    Cores this process may run on, used when no worker count is configured.
    """
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        pass

    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True, kw_only=True, slots=True)
class Context(t.Generic[Config]):
    # the stopping event, if this is set, work should stop as soon as possible
    stopping: threading.Event
    # the logger attached to this context
    log: logging.Logger

    # the configuration for this context
    cfg: Config

    # number of threads used for embarrassingly parallel work
    workers: int = 1

    # the parent context, if any
    parent: "Context[Config] | None" = None
    # the root context, if any
    root: "Context[Config] | None" = None

    def bind(
        self,
        logger: logging.Logger | None = None,
        workers: int | None = None,
    ) -> "Context[Config]":
        return Context(
            cfg=self.cfg,
            log=logger or self.log,
            workers=self.workers if workers is None else max(1, workers),
            parent=self,
            root=self.root or self,
            stopping=self.stopping,
        )

    def thread_pool(
        self,
        max_workers: int | None = None,
    ) -> core.ThreadPoolExecutor:
        """
        Create a ThreadPoolExecutor that is aware of this context.
        """
        return core.ThreadPoolExecutor(
            self.stopping,
            self.log,
            max_workers=max_workers or self.workers,
        )

    def maybe_stop(self) -> None:
        """
        If the stopping event is set, raise a Stopping exception, unless there
        is an exception already being raised.
        """
        if not self.stopping.is_set():
            return

        _, obj, tb = sys.exc_info()

        if obj is None:
            raise core.Stopping

        # if we get here, we're in an exception handler and we're going to
        # raise the exception again so that it can be handled by the caller
        raise obj.with_traceback(tb)

    def map(
        self,
        func: t.Callable[[T], R],
        items: t.Sequence[T],
    ) -> t.List[R]:
        """
        Apply `func` to every item, in parallel when more than one worker is
        configured. Results are returned in the order of `items` regardless
        of scheduling.
        """
        if self.workers <= 1 or len(items) <= 1:
            ret: t.List[R] = []

            for item in items:
                self.maybe_stop()
                ret.append(func(item))

            return ret

        with self.thread_pool(min(self.workers, len(items))) as pool:
            pending = [pool.submit(func, item) for item in items]

            try:
                return [fut.result() for fut in pending]
            finally:
                for fut in pending:
                    fut.cancel()


def default(cfg: Config | None = None, workers: int = 1) -> "Context[t.Any]":
    """
    Build a root context with a fresh stopping event.
    """
    return Context(
        stopping=threading.Event(),
        log=logging.get_logger("sprinter"),
        cfg=cfg,
        workers=max(1, workers),
    )


def ensure(ctx: "Context[t.Any] | None") -> "Context[t.Any]":
    """
    Return `ctx`, or a sequential root context when it is None.
    """
    if ctx is None:
        return default()

    return ctx
