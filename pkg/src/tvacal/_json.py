"""JSON rendering with 17-significant-digit floats.

The stdlib encoder writes the shortest repr of a float; files here are
expected to carry a fixed 17 digits instead, so floats are rendered by hand.
"""
from __future__ import annotations

import json
import math

import numpy as np


def _render(obj, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    colon = ":" if indent is None else ": "
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + colon + _render(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric vectors stay on one line even when indenting
        flat = all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj)
        if flat:
            return "[" + ", ".join(_render(v, None, 0) for v in obj) + "]"
        items = [_render(v, indent, level + 1) for v in obj]
        return "[" + pad + ("," + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2) -> str:
    return _render(obj, indent, 0)


def loads(text):
    return json.loads(text)
