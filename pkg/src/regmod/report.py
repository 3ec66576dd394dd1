"""Canonical JSON report envelope for the command-line tools.

Every command emits one envelope: a fixed set of top-level fields wrapping
a command-specific result payload.  The envelope is rendered by a small
canonical serializer so that reruns with identical inputs produce
byte-identical output (apart from ``wall_time_ms``):

* object keys are sorted,
* floats are printed with 17 significant digits,
* non-finite floats (nan, +-inf) render as ``null``, since strict JSON
  has no token for them; the surrounding status/notes fields say why a
  value is missing.

``jsonable`` converts the library's frozen dataclasses, numpy scalars,
and arrays into plain dict/list structures first.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

SCHEMA_VERSION = "1"

__all__ = [
    "SCHEMA_VERSION",
    "Report",
    "canonical_json",
    "jsonable",
    "load_packaged_schema",
    "render_report",
]


@dataclass(frozen=True)
class Report:
    """Envelope around one command's result.

    ``problem_hash`` is the digest of the whitespace-normalized problem
    text (None for commands that take no problem file).  ``params`` echoes
    every tolerance, seed, and schedule that influenced the result, so a
    reader can replay the command.  ``wall_time_ms`` is the only field
    allowed to differ between replays.
    """

    command: str
    problem_hash: str | None
    params: dict
    result: Any
    witnesses: tuple = ()
    warnings: tuple = ()
    wall_time_ms: int = 0
    schema_version: str = SCHEMA_VERSION


def jsonable(obj: Any) -> Any:
    """Plain dict/list/scalar view of dataclasses, numpy types, tuples."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in seq]
    return str(obj)


def _render_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    out = format(x, ".17g")
    # ".17g" may drop the decimal point entirely; that is still a valid
    # JSON number, so leave it as is.
    return out


def _render(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close_pad = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _render_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            rendered = _render(obj[key], indent, level + 1)
            items.append(f"{pad}{json.dumps(str(key))}: {rendered}")
        return "{\n" + ",\n".join(items) + "\n" + close_pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _render(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close_pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats,
    non-finite floats as null."""
    return _render(jsonable(obj), indent, 0)


def render_report(report: Report) -> str:
    """Full envelope as canonical JSON text (with trailing newline)."""
    payload = {
        "schema_version": report.schema_version,
        "command": report.command,
        "problem_hash": report.problem_hash,
        "params": report.params,
        "result": report.result,
        "witnesses": list(report.witnesses),
        "warnings": list(report.warnings),
        "wall_time_ms": report.wall_time_ms,
    }
    return canonical_json(payload) + "\n"


def load_packaged_schema() -> dict:
    """The report JSON schema shipped inside the package."""
    text = resources.files("regmod").joinpath("report.schema.json").read_text()
    return json.loads(text)
