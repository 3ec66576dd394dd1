"""Problem file parsing and canonical hashing.

A problem file declares dimensions and constraints in labeled sections::

    [problem] name=sys-ex1 dp=1 dx=2
    [ineq]
    h1 = x1 - 1
    h2 = -x1 - 1
    [eq]
    e1 = x1 + x2

Bilevel problems add an upper objective, a lower objective, and optional
parameter-only constraints::

    [upper]
    G = x1^2 + (p1 - 0.5)^2
    [lower]
    f = -x1
    [pcons]
    g1 = p1 - 2

Content may also follow a section tag on the same line.  Lines starting
with ``#`` are comments.  Constraint labels must be sequential within
their section (``h1, h2, ...``).
"""

from __future__ import annotations

import hashlib
import re
import warnings as _warnings
from dataclasses import dataclass, field
from pathlib import Path

from .bilevel import BilevelProblem
from .expr import Expr, ExprError, NonsmoothWarning, parse
from .system import ParametricSystem

__all__ = [
    "ProblemFormatError",
    "LoadedProblem",
    "parse_problem_text",
    "load_problem",
    "problem_hash",
]

_SECTIONS = ("problem", "ineq", "eq", "upper", "lower", "pcons")
_SECTION_RE = re.compile(r"^\[(\w+)\]\s*(.*)$")
_HEADER_KV_RE = re.compile(r"(\w+)=(\S+)")


class ProblemFormatError(Exception):
    """Malformed problem file; message includes the line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LoadedProblem:
    """A parsed problem file.

    ``system`` always holds the constraint system; ``bilevel`` is present
    only when the file declares upper and lower objectives.
    """

    system: ParametricSystem
    bilevel: BilevelProblem | None
    text: str
    hash: str
    warnings: tuple[str, ...] = field(default=())

    @property
    def name(self) -> str:
        return self.system.name


def problem_hash(text: str) -> str:
    """SHA-256 of the whitespace-normalized problem text.

    Normalization collapses interior whitespace runs, strips line ends,
    and drops blank lines, so formatting-only edits do not change the
    hash.
    """
    lines = []
    for raw in text.splitlines():
        collapsed = " ".join(raw.split())
        if collapsed:
            lines.append(collapsed)
    canon = "\n".join(lines)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _split_sections(text: str) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name, inline = m.group(1).lower(), m.group(2).strip()
            if name not in _SECTIONS:
                raise ProblemFormatError(f"unknown section [{name}]", line_no)
            if name in sections:
                raise ProblemFormatError(f"duplicate section [{name}]", line_no)
            sections[name] = []
            current = name
            if inline:
                sections[name].append((line_no, inline))
            continue
        if current is None:
            raise ProblemFormatError("content before any [section] header", line_no)
        sections[current].append((line_no, line))
    return sections


def _parse_header(entries: list[tuple[int, str]]) -> tuple[str, int, int]:
    if not entries:
        raise ProblemFormatError("[problem] section is empty")
    joined = " ".join(text for _, text in entries)
    line_no = entries[0][0]
    kv = dict(_HEADER_KV_RE.findall(joined))
    missing = [k for k in ("name", "dp", "dx") if k not in kv]
    if missing:
        raise ProblemFormatError(f"[problem] missing {', '.join(missing)}", line_no)
    try:
        dp, dx = int(kv["dp"]), int(kv["dx"])
    except ValueError as exc:
        raise ProblemFormatError(f"bad dimension: {exc}", line_no) from None
    if dp < 0 or dx < 1:
        raise ProblemFormatError("need dp >= 0 and dx >= 1", line_no)
    return kv["name"], dp, dx


def _parse_labeled(
    entries: list[tuple[int, str]],
    prefix: str,
    dp: int,
    dx: int,
) -> list[Expr]:
    out: list[Expr] = []
    for k, (line_no, text) in enumerate(entries, start=1):
        if "=" not in text:
            raise ProblemFormatError(f"expected '{prefix}{k} = <expr>'", line_no)
        label, body = (part.strip() for part in text.split("=", 1))
        if label != f"{prefix}{k}":
            raise ProblemFormatError(
                f"expected label {prefix}{k!s} but found {label!r} (labels must be sequential)",
                line_no,
            )
        try:
            out.append(parse(body, dp, dx))
        except ExprError as exc:
            raise ProblemFormatError(f"in {label}: {exc}", line_no) from exc
    return out


def _parse_single(entries: list[tuple[int, str]], key: str, dp: int, dx: int, section: str) -> Expr:
    if len(entries) != 1:
        line_no = entries[0][0] if entries else None
        raise ProblemFormatError(f"[{section}] must contain exactly one '{key} = <expr>' line", line_no)
    line_no, text = entries[0]
    if "=" not in text:
        raise ProblemFormatError(f"expected '{key} = <expr>'", line_no)
    label, body = (part.strip() for part in text.split("=", 1))
    if label != key:
        raise ProblemFormatError(f"expected label {key!r} but found {label!r}", line_no)
    try:
        return parse(body, dp, dx)
    except ExprError as exc:
        raise ProblemFormatError(f"in {label}: {exc}", line_no) from exc


def parse_problem_text(text: str) -> LoadedProblem:
    """Parse problem file content into a :class:`LoadedProblem`."""
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always", NonsmoothWarning)
        sections = _split_sections(text)
        if "problem" not in sections:
            raise ProblemFormatError("missing [problem] section")
        name, dp, dx = _parse_header(sections["problem"])
        ineq = _parse_labeled(sections.get("ineq", []), "h", dp, dx)
        eq = _parse_labeled(sections.get("eq", []), "e", dp, dx)
        if not ineq and not eq:
            raise ProblemFormatError("no constraints declared ([ineq] and [eq] both empty)")
        system = ParametricSystem(name, dp, dx, ineq, eq)

        bilevel = None
        has_upper = "upper" in sections
        has_lower = "lower" in sections
        if has_upper != has_lower:
            raise ProblemFormatError("bilevel files need both [upper] and [lower] sections")
        if has_upper:
            upper = _parse_single(sections["upper"], "G", dp, dx, "upper")
            lower = _parse_single(sections["lower"], "f", dp, dx, "lower")
            pcons = _parse_labeled(sections.get("pcons", []), "g", dp, dx)
            for j, g in enumerate(pcons, start=1):
                if g.depends_on_x():
                    raise ProblemFormatError(
                        f"parameter constraint g{j} must not depend on x variables"
                    )
            bilevel = BilevelProblem(name=name, system=system, upper=upper, lower=lower, pcons=tuple(pcons))
        elif "pcons" in sections:
            raise ProblemFormatError("[pcons] requires [upper] and [lower] sections")

    messages = tuple(str(w.message) for w in caught if issubclass(w.category, NonsmoothWarning))
    return LoadedProblem(
        system=system,
        bilevel=bilevel,
        text=text,
        hash=problem_hash(text),
        warnings=messages,
    )


def load_problem(path: str | Path) -> LoadedProblem:
    """Read and parse a problem file from disk."""
    return parse_problem_text(Path(path).read_text(encoding="utf-8"))
