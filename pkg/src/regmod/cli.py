"""Command-line front end: problem ingestion, analysis, JSON reports.

Exit codes separate mechanics from mathematics:

* 0 - the analysis completed; verdicts (violated, diverging, not lsc,
  rows failing) live in the JSON, never in the exit code,
* 1 - usage or parse error (bad flags, malformed problem file, wrong
  vector lengths),
* 2 - numerical failure: the analysis could not produce usable numbers
  (infeasible base point or anchor, no usable samples, lower level
  infeasible at the queried parameter).

``--threads N`` (or the ``REGMOD_THREADS`` environment variable) is
accepted for interface compatibility and affects speed only; sample
evaluation is sequential in this implementation and results never depend
on it, so it is deliberately not echoed into report params.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bilevel import (
    DEFAULT_MU_GRID,
    PENALTY_TEST_TOL,
    VALUE_TOL,
    InfeasibleAnchorError,
    find_penalty_threshold,
    phi_lipschitz_estimate,
    solve_lower,
)
from .cq import InfeasibleBaseError, check_rcrcq
from .fixtures_registry import list_fixtures
from .numerics import DEFAULT_RANK_TOL, unit_sphere_points
from .problem_io import LoadedProblem, ProblemFormatError, load_problem
from .projection import ProjectOptions, project
from .regularity import (
    ShrinkSchedule,
    check_lsc,
    cone_compare,
    estimate_aubin_modulus,
    estimate_lower_lipschitz,
    estimate_r_modulus,
)
from .report import Report, jsonable, render_report
from .system import DEFAULT_TOL_FEAS

__all__ = ["run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _ParserExit(Exception):
    """Carries argparse's exit request as an exception."""

    def __init__(self, code: int):
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse variant that never calls sys.exit and maps every usage
    failure to exit code 1."""

    def exit(self, status: int = 0, message: str | None = None):
        if message:
            sys.stderr.write(message)
        raise _ParserExit(EXIT_USAGE if status else EXIT_OK)

    def error(self, message: str):
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _ParserExit(EXIT_USAGE)


@dataclass
class _Outcome:
    """One handler's contribution to the report envelope."""

    problem_hash: str | None
    params: dict
    result: object
    witnesses: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    code: int = EXIT_OK


def _csv_floats(text: str) -> tuple[float, ...]:
    """Comma-separated decimals; empty string means the empty vector."""
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _load(args) -> LoadedProblem:
    path = Path(args.problem)
    if not path.is_file():
        raise ProblemFormatError(f"problem file not found: {path}")
    return load_problem(path)


def _require_bilevel(loaded: LoadedProblem):
    if loaded.bilevel is None:
        raise ProblemFormatError(
            f"problem {loaded.name!r} declares no [upper]/[lower] objectives; "
            "this command needs a bilevel problem file"
        )
    return loaded.bilevel


def _payload(report) -> dict:
    """Report dataclass as a dict, without the per-sample replay list."""
    d = jsonable(report)
    if isinstance(d, dict):
        d.pop("samples", None)
    return d


def _sphere_directions(dx: int, n: int, seed: int) -> list[tuple[float, ...]]:
    """Deterministic unit directions for the cone comparison."""
    pts = unit_sphere_points(dx, n, seed)
    return [tuple(float(t) for t in row) for row in np.atleast_2d(pts)]


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_fixtures(args) -> _Outcome:
    entries = [jsonable(info) for info in list_fixtures()]
    return _Outcome(problem_hash=None, params={}, result=entries)


def _cmd_validate(args) -> _Outcome:
    loaded = _load(args)
    sys_ = loaded.system
    result = {
        "name": sys_.name,
        "dp": sys_.dp,
        "dx": sys_.dx,
        "n_ineq": len(sys_.ineq),
        "n_eq": len(sys_.eq),
        "has_bilevel": loaded.bilevel is not None,
        "status": "ok",
    }
    return _Outcome(
        problem_hash=loaded.hash,
        params={},
        result=result,
        warnings=list(loaded.warnings),
    )


def _cmd_project(args) -> _Outcome:
    loaded = _load(args)
    p = _csv_floats(args.p)
    v = _csv_floats(args.v)
    opts = ProjectOptions()
    res = project(loaded.system, p, v, opts)
    params = {
        "p": list(p),
        "v": list(v),
        "tol_feas": opts.tol_feas,
        "tol_kkt": opts.tol_kkt,
        "n_starts": opts.n_starts,
        "max_outer": opts.max_outer,
        "max_inner": opts.max_inner,
    }
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=jsonable(res),
        warnings=list(loaded.warnings),
    )


def _cmd_rcrcq(args) -> _Outcome:
    loaded = _load(args)
    p0 = _csv_floats(args.p0)
    x0 = _csv_floats(args.x0)
    rep = check_rcrcq(
        loaded.system, p0, x0, radius=args.radius, n_samples=args.samples, seed=args.seed
    )
    witnesses = [
        {"subset": list(rec.subset), "p": list(rec.witness[0]), "x": list(rec.witness[1])}
        for rec in rep.per_subset
        if rec.witness is not None
    ]
    params = {
        "p0": list(p0),
        "x0": list(x0),
        "radius": args.radius,
        "samples": args.samples,
        "seed": args.seed,
        "rank_tol": DEFAULT_RANK_TOL,
        "tol_feas": DEFAULT_TOL_FEAS,
    }
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=jsonable(rep),
        witnesses=witnesses,
        warnings=list(loaded.warnings),
    )


def _regularity_outcome(loaded, rep, params) -> _Outcome:
    witnesses = [jsonable(rep.witness)] if rep.witness is not None else []
    code = EXIT_NUMERICAL if rep.status == "no_usable_samples" else EXIT_OK
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=_payload(rep),
        witnesses=witnesses,
        warnings=list(loaded.warnings),
        code=code,
    )


def _cmd_rreg(args) -> _Outcome:
    loaded = _load(args)
    p0 = _csv_floats(args.p0)
    x0 = _csv_floats(args.x0)
    sched = ShrinkSchedule(
        r0=args.r0, factor=args.factor, steps=args.steps, samples_per_step=args.samples
    )
    rep = estimate_r_modulus(loaded.system, p0, x0, sched, seed=args.seed)
    params = {
        "p0": list(p0),
        "x0": list(x0),
        "r0": args.r0,
        "factor": args.factor,
        "steps": args.steps,
        "samples": args.samples,
        "seed": args.seed,
    }
    return _regularity_outcome(loaded, rep, params)


def _cmd_aubin(args) -> _Outcome:
    loaded = _load(args)
    p0 = _csv_floats(args.p0)
    x0 = _csv_floats(args.x0)
    rep = estimate_aubin_modulus(
        loaded.system,
        p0,
        x0,
        args.delta,
        args.eps,
        n_pairs=args.samples,
        seed=args.seed,
        steps=args.steps,
        factor=args.factor,
    )
    params = {
        "p0": list(p0),
        "x0": list(x0),
        "delta": args.delta,
        "eps": args.eps,
        "samples": args.samples,
        "steps": args.steps,
        "factor": args.factor,
        "seed": args.seed,
    }
    return _regularity_outcome(loaded, rep, params)


def _cmd_lolip(args) -> _Outcome:
    loaded = _load(args)
    p0 = _csv_floats(args.p0)
    x0 = _csv_floats(args.x0)
    rep = estimate_lower_lipschitz(
        loaded.system,
        p0,
        x0,
        args.delta,
        n=args.samples,
        seed=args.seed,
        steps=args.steps,
        factor=args.factor,
    )
    params = {
        "p0": list(p0),
        "x0": list(x0),
        "delta": args.delta,
        "samples": args.samples,
        "steps": args.steps,
        "factor": args.factor,
        "seed": args.seed,
    }
    return _regularity_outcome(loaded, rep, params)


def _cmd_lsc(args) -> _Outcome:
    loaded = _load(args)
    p0 = _csv_floats(args.p0)
    x0 = _csv_floats(args.x0)
    rep = check_lsc(
        loaded.system, p0, x0, args.delta, args.eps, n=args.samples, seed=args.seed
    )
    witnesses = []
    if rep.witness is not None:
        witnesses.append({"p": list(rep.witness), "distance": rep.witness_distance})
    params = {
        "p0": list(p0),
        "x0": list(x0),
        "delta": args.delta,
        "eps": args.eps,
        "samples": args.samples,
        "seed": args.seed,
    }
    code = EXIT_NUMERICAL if rep.n_checked == 0 else EXIT_OK
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=_payload(rep),
        witnesses=witnesses,
        warnings=list(loaded.warnings),
        code=code,
    )


def _cmd_cones(args) -> _Outcome:
    loaded = _load(args)
    p = _csv_floats(args.p0)
    x = _csv_floats(args.x0)
    directions = _sphere_directions(loaded.system.dx, args.samples, args.seed)
    rep = cone_compare(loaded.system, p, x, directions, cq_verified=args.cq_verified)
    witnesses = [
        jsonable(rec)
        for rec in rep.records
        if rec.tangent_on_samples is not None and rec.tangent_on_samples != rec.in_gamma
    ]
    params = {
        "p0": list(p),
        "x0": list(x),
        "samples": args.samples,
        "seed": args.seed,
        "cq_verified": args.cq_verified,
    }
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=jsonable(rep),
        witnesses=witnesses,
        warnings=list(loaded.warnings),
    )


def _cmd_value(args) -> _Outcome:
    loaded = _load(args)
    blp = _require_bilevel(loaded)
    p = _csv_floats(args.p)
    res = solve_lower(blp, p)
    params = {"p": list(p), "value_tol": VALUE_TOL}
    code = EXIT_OK if res.status == "ok" else EXIT_NUMERICAL
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=jsonable(res),
        warnings=list(loaded.warnings),
        code=code,
    )


def _cmd_phi_lip(args) -> _Outcome:
    loaded = _load(args)
    blp = _require_bilevel(loaded)
    p0 = _csv_floats(args.p0)
    rep = phi_lipschitz_estimate(blp, p0, args.delta, n=args.samples, seed=args.seed)
    params = {
        "p0": list(p0),
        "delta": args.delta,
        "samples": args.samples,
        "seed": args.seed,
    }
    return _regularity_outcome(loaded, rep, params)


def _cmd_penalty(args) -> _Outcome:
    loaded = _load(args)
    blp = _require_bilevel(loaded)
    p_star = _csv_floats(args.pstar)
    x_star = _csv_floats(args.xstar)
    mu_grid = _csv_floats(args.mu_grid) if args.mu_grid is not None else None
    rep = find_penalty_threshold(
        blp,
        p_star,
        x_star,
        mu_grid=mu_grid,
        radius=args.radius,
        n=args.samples,
        seed=args.seed,
    )
    witnesses = [
        {
            "mu": row.mu,
            "p": list(row.witness[0]),
            "x": list(row.witness[1]),
            "deficit": row.worst_deficit,
        }
        for row in rep.per_mu
        if row.witness is not None
    ]
    params = {
        "pstar": list(p_star),
        "xstar": list(x_star),
        "mu_grid": list(mu_grid if mu_grid is not None else DEFAULT_MU_GRID),
        "radius": args.radius,
        "samples": args.samples,
        "seed": args.seed,
        "tol": PENALTY_TEST_TOL,
    }
    code = EXIT_NUMERICAL if rep.status == "no_usable_samples" else EXIT_OK
    return _Outcome(
        problem_hash=loaded.hash,
        params=params,
        result=jsonable(rep),
        witnesses=witnesses,
        warnings=list(loaded.warnings),
        code=code,
    )


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker count (speed only; never changes results)",
    )
    common.add_argument("--out", default=None, help="write the JSON report to this file")

    parser = _Parser(prog="regmod", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="cmd", required=True, metavar="command")

    def add(name: str, func: Callable, needs_problem: bool = True, **kwargs):
        sp = sub.add_parser(name, parents=[common], **kwargs)
        if needs_problem:
            sp.add_argument("--problem", required=True, help="problem file path")
        sp.set_defaults(func=func)
        return sp

    add(
        "fixtures",
        _cmd_fixtures,
        needs_problem=False,
        help="list the shipped example problems",
    )

    add("validate", _cmd_validate, help="parse a problem file and summarize it")

    sp = add("project", _cmd_project, help="project a point onto the feasible set")
    sp.add_argument("--p", required=True, help="parameter vector, comma separated")
    sp.add_argument("--v", required=True, help="point to project, comma separated")

    sp = add("rcrcq", _cmd_rcrcq, help="sample-based constant-rank check")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--radius", type=float, default=1e-2)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("rreg", _cmd_rreg, help="distance-over-residual modulus estimate")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--r0", type=float, default=0.1)
    sp.add_argument("--factor", type=float, default=0.5)
    sp.add_argument("--steps", type=int, default=6)
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("aubin", _cmd_aubin, help="two-parameter Lipschitz modulus estimate")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=0.5)
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--steps", type=int, default=6)
    sp.add_argument("--factor", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("lolip", _cmd_lolip, help="lower Lipschitz constant estimate")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--steps", type=int, default=6)
    sp.add_argument("--factor", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("lsc", _cmd_lsc, help="lower semicontinuity probe")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--eps", type=float, default=0.5)
    sp.add_argument("--samples", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("cones", _cmd_cones, help="linearized cone vs sampled tangency")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--samples", type=int, default=16, help="number of directions")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument(
        "--cq-verified",
        action="store_true",
        help="treat the constant-rank condition as verified, so any "
        "cone disagreement is flagged as an inconsistency",
    )

    sp = add("value", _cmd_value, help="lower-level optimal value at a parameter")
    sp.add_argument("--p", required=True)

    sp = add("phi-lip", _cmd_phi_lip, help="value-function Lipschitz estimate")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--delta", type=float, default=0.2)
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("penalty", _cmd_penalty, help="exact penalty threshold search")
    sp.add_argument("--pstar", required=True)
    sp.add_argument("--xstar", required=True)
    sp.add_argument("--mu-grid", default=None, help="penalty weights, comma separated")
    sp.add_argument("--radius", type=float, default=0.25)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)

    return parser


def _resolve_threads(args) -> int:
    raw = args.threads
    if raw is None:
        raw = os.environ.get("REGMOD_THREADS", "1")
    n = int(raw)
    if n < 1:
        raise ValueError(f"--threads must be a positive integer, got {n}")
    return n


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _ParserExit as e:
        return e.code

    t0 = time.perf_counter()
    try:
        _resolve_threads(args)
        outcome: _Outcome = args.func(args)
    except (InfeasibleBaseError, InfeasibleAnchorError) as e:
        sys.stderr.write(f"regmod {args.cmd}: numerical failure: {e}\n")
        return EXIT_NUMERICAL
    except (ProblemFormatError, ValueError, OSError) as e:
        sys.stderr.write(f"regmod {args.cmd}: error: {e}\n")
        return EXIT_USAGE

    wall_ms = int(round((time.perf_counter() - t0) * 1000.0))
    report = Report(
        command=args.cmd,
        problem_hash=outcome.problem_hash,
        params=outcome.params,
        result=outcome.result,
        witnesses=tuple(outcome.witnesses),
        warnings=tuple(outcome.warnings),
        wall_time_ms=wall_ms,
    )
    text = render_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return outcome.code


def main() -> None:
    sys.exit(run(sys.argv[1:]))
