import typing as t

import msgspec
from msgspec import json
import numpy as np

from sprinter import errors

__all__ = (
    "dumps",
    "loads",
)

T = t.TypeVar("T")


def enc_hook(obj: t.Any) -> t.Any:
    if hasattr(obj, "to_json"):
        return obj.to_json()

    if isinstance(obj, np.ndarray):
        return obj.tolist()

    if isinstance(obj, np.generic):
        return obj.item()

    raise NotImplementedError(f"Cannot serialize {obj!r}")


def dumps(obj: t.Any, indent: int = 0) -> bytes:
    ret = json.encode(obj, enc_hook=enc_hook)

    if indent:
        ret = json.format(ret, indent=indent)

    return ret


@t.overload
def loads(obj: bytes) -> t.Any:
    ...


@t.overload
def loads(obj: bytes, type: t.Type[T]) -> T:
    ...


def loads(obj: bytes, type: t.Any = t.Any) -> t.Any:
    try:
        return json.decode(obj, type=type)
    except msgspec.DecodeError as e:
        raise errors.InputError(f"malformed JSON: {e}") from e
