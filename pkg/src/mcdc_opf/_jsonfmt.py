"""Canonical JSON text: sorted keys, two-space indent, 17 significant digits."""

from __future__ import annotations

import json
import math


class NonFiniteValue(ValueError):
    pass


def _num(v: float, path: str) -> str:
    if not math.isfinite(v):
        raise NonFiniteValue(f"non-finite number at {path or '/'}")
    if v == 0.0:
        return "0.0" if math.copysign(1.0, v) > 0 else "-0.0"
    s = format(v, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []

    def emit(o, level: int, path: str):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            out.append("null")
        elif o is True:
            out.append("true")
        elif o is False:
            out.append("false")
        elif isinstance(o, int):
            out.append(str(o))
        elif isinstance(o, float):
            out.append(_num(o, path))
        elif isinstance(o, str):
            out.append(json.dumps(o, ensure_ascii=False))
        elif isinstance(o, dict):
            if not o:
                out.append("{}")
                return
            out.append("{\n")
            keys = sorted(o)
            for i, k in enumerate(keys):
                out.append(f"{pad}{json.dumps(str(k), ensure_ascii=False)}: ")
                emit(o[k], level + 1, f"{path}/{k}")
                out.append(",\n" if i < len(keys) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(o, (list, tuple)):
            if not o:
                out.append("[]")
                return
            out.append("[\n")
            for i, v in enumerate(o):
                out.append(pad)
                emit(v, level + 1, f"{path}/{i}")
                out.append(",\n" if i < len(o) - 1 else "\n")
            out.append(end + "]")
        elif hasattr(o, "item"):
            emit(o.item(), level, path)
        else:
            raise TypeError(f"cannot serialise {type(o).__name__} at {path or '/'}")

    emit(obj, 0, "")
    out.append("\n")
    return "".join(out)
