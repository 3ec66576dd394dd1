"""Registry of the canonical fixture problems shipped with the package."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .problem_io import LoadedProblem, load_problem

__all__ = ["FixtureInfo", "FIXTURE_NAMES", "fixture_path", "load_fixture", "list_fixtures"]

_FILES = {
    "SYS-BALL": "sys_ball.prob",
    "SYS-EX1": "sys_ex1.prob",
    "SYS-LIN": "sys_lin.prob",
    "SYS-RANKDROP": "sys_rankdrop.prob",
    "SYS-DEGEN": "sys_degen.prob",
    "BLPP-1": "blpp1.prob",
    "BLPP-BOX": "blpp_box.prob",
}

FIXTURE_NAMES = tuple(_FILES)


@dataclass(frozen=True)
class FixtureInfo:
    name: str
    path: str
    kind: str  # "system" or "bilevel"
    dp: int
    dx: int


def fixture_path(name: str) -> Path:
    """Filesystem path of a shipped fixture problem file."""
    try:
        filename = _FILES[name.upper()]
    except KeyError:
        known = ", ".join(FIXTURE_NAMES)
        raise KeyError(f"unknown fixture {name!r}; known fixtures: {known}") from None
    with resources.as_file(resources.files("regmod") / "fixtures" / filename) as p:
        return Path(p)


def load_fixture(name: str) -> LoadedProblem:
    """Load a shipped fixture by canonical name (e.g. ``SYS-EX1``)."""
    return load_problem(fixture_path(name))


def list_fixtures() -> list[FixtureInfo]:
    out = []
    for name in FIXTURE_NAMES:
        loaded = load_fixture(name)
        out.append(
            FixtureInfo(
                name=name,
                path=str(fixture_path(name)),
                kind="bilevel" if loaded.bilevel is not None else "system",
                dp=loaded.system.dp,
                dx=loaded.system.dx,
            )
        )
    return out
