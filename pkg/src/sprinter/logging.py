"""
Structured logging for the library and the CLI.

Records always go to stderr: stdout is reserved for command summaries that
callers parse. In a terminal they are rendered for humans, otherwise as JSON
lines encoded with msgspec so that numpy scalars and arrays in event fields
serialize without special casing at the call site.
"""

import contextlib
import logging
import sys
import typing as t

import msgspec
import structlog
from structlog import contextvars

from sprinter.io import json


Logger: t.TypeAlias = structlog.stdlib.BoundLogger


LEVELS: t.Dict[str, int] = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}

# numpy and scipy route RuntimeWarnings through here
QUIET: t.Dict[str, int] = {
    "py.warnings": logging.ERROR,
}


def get_logger(name: str) -> Logger:
    return t.cast(Logger, structlog.getLogger(name))


def level_from_name(name: str) -> int:
    """
    Map a `--log-level` choice to a stdlib level. Unknown names fall back to
    WARNING, the CLI default.
    """
    return LEVELS.get(name.lower(), logging.WARNING)


@contextlib.contextmanager
def context(**kwargs: t.Any) -> t.Iterator[None]:
    """
    Bind fields such as the command and seed to every record emitted by
    this thread inside the block.
    """
    with contextvars.bound_contextvars(**kwargs):
        yield


def _fallback(obj: t.Any) -> t.Any:
    try:
        return json.enc_hook(obj)
    except NotImplementedError:
        return repr(obj)


def _render_json(event: t.Any, **_: t.Any) -> str:
    return msgspec.json.encode(event, enc_hook=_fallback).decode()


def structlog_processors(tty: bool | None = None) -> t.List[t.Any]:
    if tty is None:
        tty = sys.stderr.isatty()

    processors: t.List[t.Any] = [
        contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
    ]

    if tty:
        processors.append(structlog.dev.ConsoleRenderer())
    else:
        processors += [
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(serializer=_render_json),
        ]

    return processors


def configure(
    level: int = logging.WARNING,
    quiet: t.Mapping[str, int] | None = None,
) -> None:
    """
    Route structlog through the stdlib root logger at `level`.

    :param quiet: Extra `{logger name: level}` overrides on top of `QUIET`.
    """
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=level,
        force=True,
    )

    structlog.configure(
        processors=structlog_processors(),
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    for name, lvl in {**QUIET, **(quiet or {})}.items():
        logging.getLogger(name).setLevel(lvl)
