"""Scalar expression language over parameter and decision variables.

Expressions are built from the variables ``p1..pdp`` and ``x1..xdx``,
decimal numbers, the binary operators ``+ - * /``, unary minus, integer
powers ``^k`` with ``k >= 0``, and the functions ``abs``, ``sin``,
``cos``, ``exp``, ``log``.  Parsing produces an immutable tree that
supports exact evaluation and exact forward-mode first derivatives with
respect to either variable block.

The derivative of ``abs`` at zero is taken to be zero.  Applying ``abs``
to a subexpression that depends on any ``x`` variable emits a
:class:`NonsmoothWarning` at parse time (downstream rank and multiplier
computations assume differentiability in ``x``); ``abs`` of
parameter-only subexpressions is silent.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "IndexRangeError",
    "DomainError",
    "NonsmoothWarning",
    "parse",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Pow",
]

_FUNCTIONS = ("abs", "sin", "cos", "exp", "log")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; carries the byte offset of the offending token."""

    def __init__(self, message: str, text: str, offset: int):
        self.offset = _byte_offset(text, offset)
        super().__init__(f"{message} (byte {self.offset})")


class UnknownIdentifierError(ParseError):
    """Identifier is not a variable or a known function."""


class IndexRangeError(ParseError):
    """Variable index outside the declared dimensions."""


class DomainError(ExprError):
    """Evaluation hit a singularity (division by zero, log of a
    non-positive value, overflow)."""

    def __init__(self, message: str, node: "_Node"):
        self.node = node
        span = getattr(node, "span", (-1, -1))
        if span[0] >= 0:
            message = f"{message} (expression bytes {span[0]}..{span[1]})"
        super().__init__(message)


class NonsmoothWarning(UserWarning):
    """abs applied to a subexpression that depends on x."""


def _byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


# ---------------------------------------------------------------------------
# AST nodes.  Spans record (start, end) character offsets into the source
# text and are excluded from structural equality so printed-and-reparsed
# trees compare equal.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float
    span: tuple[int, int] = field(default=(-1, -1), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    kind: str  # "p" or "x"
    index: int  # 1-based
    span: tuple[int, int] = field(default=(-1, -1), compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, sin, cos, exp, log
    child: "_Node"
    span: tuple[int, int] = field(default=(-1, -1), compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div
    left: "_Node"
    right: "_Node"
    span: tuple[int, int] = field(default=(-1, -1), compare=False, repr=False)


@dataclass(frozen=True)
class Pow:
    base: "_Node"
    exponent: int  # >= 0
    span: tuple[int, int] = field(default=(-1, -1), compare=False, repr=False)


_Node = Const | Var | Unary | Binary | Pow


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | op | end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = n - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {stripped[0]!r}", text, bad_at)
        for kind in ("number", "ident", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append(_Token(kind, val, m.start(kind)))
                break
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
#
#   expr  := term (('+'|'-') term)*
#   term  := unary (('*'|'/') unary)*
#   unary := '-' unary | power
#   power := atom ('^' integer)?
#   atom  := number | ident | func '(' expr ')' | '(' expr ')'
# ---------------------------------------------------------------------------

_VAR_RE = re.compile(r"^([px])([0-9]+)$")


class _Parser:
    def __init__(self, text: str, dp: int, dx: int):
        self.text = text
        self.dp = dp
        self.dx = dx
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected {op!r}", self.text, tok.offset)
        return self.advance()

    def parse(self) -> _Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected trailing input {tok.text!r}", self.text, tok.offset)
        return node

    def expr(self) -> _Node:
        node = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "+-":
                self.advance()
                rhs = self.term()
                op = "add" if tok.text == "+" else "sub"
                node = Binary(op, node, rhs, span=(node.span[0], rhs.span[1]))
            else:
                return node

    def term(self) -> _Node:
        node = self.unary()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "*/":
                self.advance()
                rhs = self.unary()
                op = "mul" if tok.text == "*" else "div"
                node = Binary(op, node, rhs, span=(node.span[0], rhs.span[1]))
            else:
                return node

    def unary(self) -> _Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            child = self.unary()
            return Unary("neg", child, span=(tok.offset, child.span[1]))
        return self.power()

    def power(self) -> _Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            etok = self.peek()
            if etok.kind != "number" or not etok.text.isdigit():
                raise ParseError("expected a nonnegative integer exponent after '^'", self.text, etok.offset)
            self.advance()
            return Pow(base, int(etok.text), span=(base.span[0], etok.offset + len(etok.text)))
        return base

    def atom(self) -> _Node:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text), span=(tok.offset, tok.offset + len(tok.text)))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in _FUNCTIONS:
                self.expect_op("(")
                child = self.expr()
                close = self.expect_op(")")
                node = Unary(name, child, span=(tok.offset, close.offset + 1))
                if name == "abs" and _depends_on_x(child):
                    warnings.warn(
                        f"abs applied to an x-dependent subexpression at byte "
                        f"{_byte_offset(self.text, tok.offset)}; derivative uses sign "
                        f"convention sign(0)=0 and downstream smoothness assumptions may fail",
                        NonsmoothWarning,
                        stacklevel=4,
                    )
                return node
            m = _VAR_RE.match(name)
            if m is None:
                raise UnknownIdentifierError(f"unknown identifier {name!r}", self.text, tok.offset)
            kind, idx = m.group(1), int(m.group(2))
            limit = self.dp if kind == "p" else self.dx
            if not 1 <= idx <= limit:
                raise IndexRangeError(
                    f"variable {name!r} out of range (declared {kind} dimension is {limit}, indices are 1-based)",
                    self.text,
                    tok.offset,
                )
            return Var(kind, idx, span=(tok.offset, tok.offset + len(name)))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"expected a number, variable, or '(' but found {tok.text or 'end of input'!r}", self.text, tok.offset)


def _depends_on_x(node: _Node) -> bool:
    match node:
        case Var(kind="x"):
            return True
        case Unary(child=c):
            return _depends_on_x(c)
        case Binary(left=l, right=r):
            return _depends_on_x(l) or _depends_on_x(r)
        case Pow(base=b):
            return _depends_on_x(b)
        case _:
            return False


# ---------------------------------------------------------------------------
# Evaluation: exact scalar path with domain errors, and a quiet vectorized
# path used by grid oracles (invalid points become NaN).
# ---------------------------------------------------------------------------


def _sign(v: float) -> float:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _eval_scalar(node: _Node, p: Sequence[float], x: Sequence[float]) -> float:
    match node:
        case Const(value=v):
            return v
        case Var(kind=k, index=i):
            return float(p[i - 1]) if k == "p" else float(x[i - 1])
        case Unary(op=op, child=c):
            v = _eval_scalar(c, p, x)
            if op == "neg":
                return -v
            if op == "abs":
                return abs(v)
            if op == "sin":
                return math.sin(v)
            if op == "cos":
                return math.cos(v)
            if op == "exp":
                try:
                    return math.exp(v)
                except OverflowError:
                    raise DomainError("overflow in exp", node) from None
            if op == "log":
                if v <= 0.0:
                    raise DomainError(f"log of non-positive value {v!r}", node)
                return math.log(v)
        case Binary(op=op, left=l, right=r):
            a = _eval_scalar(l, p, x)
            b = _eval_scalar(r, p, x)
            if op == "add":
                return a + b
            if op == "sub":
                return a - b
            if op == "mul":
                return a * b
            if op == "div":
                if b == 0.0:
                    raise DomainError("division by zero", node)
                return a / b
        case Pow(base=b, exponent=k):
            v = _eval_scalar(b, p, x)
            return v**k
    raise AssertionError(f"unhandled node {node!r}")


def _eval_dual(
    node: _Node,
    p: Sequence[float],
    x: Sequence[float],
    wrt: str,
    dim: int,
) -> tuple[float, np.ndarray]:
    """Forward-mode value and gradient with respect to the ``wrt`` block."""
    match node:
        case Const(value=v):
            return v, np.zeros(dim)
        case Var(kind=k, index=i):
            v = float(p[i - 1]) if k == "p" else float(x[i - 1])
            g = np.zeros(dim)
            if k == wrt:
                g[i - 1] = 1.0
            return v, g
        case Unary(op=op, child=c):
            v, g = _eval_dual(c, p, x, wrt, dim)
            if op == "neg":
                return -v, -g
            if op == "abs":
                return abs(v), _sign(v) * g
            if op == "sin":
                return math.sin(v), math.cos(v) * g
            if op == "cos":
                return math.cos(v), -math.sin(v) * g
            if op == "exp":
                try:
                    ev = math.exp(v)
                except OverflowError:
                    raise DomainError("overflow in exp", node) from None
                return ev, ev * g
            if op == "log":
                if v <= 0.0:
                    raise DomainError(f"log of non-positive value {v!r}", node)
                return math.log(v), g / v
        case Binary(op=op, left=l, right=r):
            a, ga = _eval_dual(l, p, x, wrt, dim)
            b, gb = _eval_dual(r, p, x, wrt, dim)
            if op == "add":
                return a + b, ga + gb
            if op == "sub":
                return a - b, ga - gb
            if op == "mul":
                return a * b, b * ga + a * gb
            if op == "div":
                if b == 0.0:
                    raise DomainError("division by zero", node)
                return a / b, (ga * b - a * gb) / (b * b)
        case Pow(base=bnode, exponent=k):
            v, g = _eval_dual(bnode, p, x, wrt, dim)
            if k == 0:
                return 1.0, np.zeros(dim)
            return v**k, k * v ** (k - 1) * g
    raise AssertionError(f"unhandled node {node!r}")


def _eval_array(node: _Node, p: Sequence[float], xs: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized evaluation over arrays of x values; singular points yield
    NaN/inf instead of raising."""
    match node:
        case Const(value=v):
            return np.asarray(v, dtype=float)
        case Var(kind=k, index=i):
            if k == "p":
                return np.asarray(float(p[i - 1]))
            return np.asarray(xs[i - 1], dtype=float)
        case Unary(op=op, child=c):
            v = _eval_array(c, p, xs)
            with np.errstate(all="ignore"):
                if op == "neg":
                    return -v
                if op == "abs":
                    return np.abs(v)
                if op == "sin":
                    return np.sin(v)
                if op == "cos":
                    return np.cos(v)
                if op == "exp":
                    return np.exp(v)
                if op == "log":
                    return np.where(v > 0.0, np.log(np.where(v > 0.0, v, 1.0)), np.nan)
        case Binary(op=op, left=l, right=r):
            a = _eval_array(l, p, xs)
            b = _eval_array(r, p, xs)
            with np.errstate(all="ignore"):
                if op == "add":
                    return a + b
                if op == "sub":
                    return a - b
                if op == "mul":
                    return a * b
                if op == "div":
                    return np.where(b != 0.0, a / np.where(b != 0.0, b, 1.0), np.nan)
        case Pow(base=bnode, exponent=k):
            v = _eval_array(bnode, p, xs)
            with np.errstate(all="ignore"):
                return v**k
    raise AssertionError(f"unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Printer.  Atoms print bare; every composite is parenthesized, so the
# output reparses to a structurally identical tree.
# ---------------------------------------------------------------------------


def _to_text(node: _Node) -> str:
    match node:
        case Const(value=v):
            if v < 0:
                return f"(-{_to_text(Const(-v))})"  # grammar has no negative literals
            if v == math.floor(v) and abs(v) < 1e16:
                return str(int(v))
            return repr(v)
        case Var(kind=k, index=i):
            return f"{k}{i}"
        case Unary(op="neg", child=c):
            return f"(-{_to_text(c)})"
        case Unary(op=op, child=c):
            return f"{op}({_to_text(c)})"
        case Binary(op=op, left=l, right=r):
            sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
            return f"({_to_text(l)} {sym} {_to_text(r)})"
        case Pow(base=b, exponent=k):
            return f"({_to_text(b)})^{k}"
    raise AssertionError(f"unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Code generation: compiles a tree into a plain Python function computing
# the value and, optionally, forward-mode partials.  Semantically identical
# to the recursive path (same operations, same sign convention for abs) and
# cross-checked against it in the test suite; used in solver hot loops.
# Domain faults surface as ZeroDivisionError/ValueError/OverflowError.
# ---------------------------------------------------------------------------


class _CodeGen:
    def __init__(self, wrt: str | None, dim: int):
        self.wrt = wrt
        self.dim = dim
        self.lines: list[str] = []
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def emit(self, node: _Node) -> tuple[str, list[str]]:
        zero = ["0.0"] * self.dim
        match node:
            case Const(value=v):
                return repr(v), zero
            case Var(kind=k, index=i):
                name = f"{k}[{i - 1}]"
                g = list(zero)
                if k == self.wrt:
                    g[i - 1] = "1.0"
                return name, g
            case Unary(op=op, child=c):
                cv, cg = self.emit(c)
                name = self.fresh()
                if op == "neg":
                    self.lines.append(f"{name} = -{cv}")
                    return name, [f"(-{d})" if d != "0.0" else "0.0" for d in cg]
                if op == "abs":
                    self.lines.append(f"{name} = abs({cv})")
                    if all(d == "0.0" for d in cg):
                        return name, zero
                    s = self.fresh()
                    self.lines.append(f"{s} = 1.0 if {cv} > 0.0 else (-1.0 if {cv} < 0.0 else 0.0)")
                    return name, [f"({s} * {d})" if d != "0.0" else "0.0" for d in cg]
                fn = {"sin": "_sin", "cos": "_cos", "exp": "_exp", "log": "_log"}[op]
                self.lines.append(f"{name} = {fn}({cv})")
                if all(d == "0.0" for d in cg):
                    return name, zero
                dname = self.fresh()
                if op == "sin":
                    self.lines.append(f"{dname} = _cos({cv})")
                elif op == "cos":
                    self.lines.append(f"{dname} = -_sin({cv})")
                elif op == "exp":
                    self.lines.append(f"{dname} = {name}")
                else:  # log
                    self.lines.append(f"{dname} = 1.0 / {cv}")
                return name, [f"({dname} * {d})" if d != "0.0" else "0.0" for d in cg]
            case Binary(op=op, left=l, right=r):
                av, ag = self.emit(l)
                bv, bg = self.emit(r)
                name = self.fresh()
                sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
                self.lines.append(f"{name} = {av} {sym} {bv}")
                if op in ("add", "sub"):
                    out = []
                    for da, db in zip(ag, bg):
                        if da == "0.0" and db == "0.0":
                            out.append("0.0")
                        elif db == "0.0":
                            out.append(da)
                        elif da == "0.0":
                            out.append(db if op == "add" else f"(-{db})")
                        else:
                            out.append(f"({da} {sym} {db})")
                    return name, out
                if op == "mul":
                    out = []
                    for da, db in zip(ag, bg):
                        terms = []
                        if da != "0.0":
                            terms.append(f"{bv} * {da}")
                        if db != "0.0":
                            terms.append(f"{av} * {db}")
                        out.append(f"({' + '.join(terms)})" if terms else "0.0")
                    return name, out
                # div
                out = []
                for da, db in zip(ag, bg):
                    if da == "0.0" and db == "0.0":
                        out.append("0.0")
                    elif db == "0.0":
                        out.append(f"({da} / {bv})")
                    elif da == "0.0":
                        out.append(f"(-{av} * {db} / ({bv} * {bv}))")
                    else:
                        out.append(f"(({da} * {bv} - {av} * {db}) / ({bv} * {bv}))")
                return name, out
            case Pow(base=bnode, exponent=k):
                bv, bg = self.emit(bnode)
                if k == 0:
                    return "1.0", zero
                name = self.fresh()
                if k == 1:
                    return bv, bg
                if k == 2:
                    self.lines.append(f"{name} = {bv} * {bv}")
                else:
                    self.lines.append(f"{name} = {bv} ** {k}")
                if all(d == "0.0" for d in bg):
                    return name, zero
                dname = self.fresh()
                if k == 2:
                    self.lines.append(f"{dname} = 2.0 * {bv}")
                else:
                    self.lines.append(f"{dname} = {k} * {bv} ** {k - 1}")
                return name, [f"({dname} * {d})" if d != "0.0" else "0.0" for d in bg]
        raise AssertionError(f"unhandled node {node!r}")


_CODEGEN_NAMESPACE = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_log": math.log,
}


def _compile(node: _Node, wrt: str | None, dim: int) -> Callable:
    gen = _CodeGen(wrt, dim)
    val, grads = gen.emit(node)
    body = "\n    ".join(gen.lines) if gen.lines else "pass"
    if wrt is None:
        ret = f"return {val}"
    else:
        ret = f"return {val}, ({', '.join(grads)},)" if dim else f"return {val}, ()"
    src = f"def _compiled(p, x):\n    {body}\n    {ret}\n"
    namespace = dict(_CODEGEN_NAMESPACE)
    exec(src, namespace)  # noqa: S102  (generated from a validated AST)
    fn = namespace["_compiled"]
    fn.__source__ = src
    return fn


# ---------------------------------------------------------------------------
# Public wrapper
# ---------------------------------------------------------------------------


class Expr:
    """An immutable expression with declared dimensions ``(dp, dx)``."""

    __slots__ = ("root", "dp", "dx", "_fns")

    def __init__(self, root: _Node, dp: int, dx: int):
        if dp < 0 or dx < 0:
            raise ValueError("dimensions must be nonnegative")
        _check_indices(root, dp, dx)
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "_fns", {})

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Expr is immutable")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Expr)
            and self.dp == other.dp
            and self.dx == other.dx
            and self.root == other.root
        )

    def __hash__(self) -> int:
        return hash((self.dp, self.dx, _to_text(self.root)))

    def __repr__(self) -> str:
        return f"Expr({_to_text(self.root)!r}, dp={self.dp}, dx={self.dx})"

    def __str__(self) -> str:
        return _to_text(self.root)

    def _check_dims(self, p: Sequence[float], x: Sequence[float]) -> None:
        if len(p) != self.dp:
            raise ValueError(f"expected {self.dp} parameter values, got {len(p)}")
        if len(x) != self.dx:
            raise ValueError(f"expected {self.dx} decision values, got {len(x)}")

    def eval(self, p: Sequence[float], x: Sequence[float]) -> float:
        """Exact scalar evaluation; raises :class:`DomainError` at
        singular points."""
        self._check_dims(p, x)
        return float(_eval_scalar(self.root, p, x))

    def grad_x(self, p: Sequence[float], x: Sequence[float]) -> np.ndarray:
        """Forward-mode gradient with respect to x."""
        self._check_dims(p, x)
        _, g = _eval_dual(self.root, p, x, "x", self.dx)
        return g

    def grad_p(self, p: Sequence[float], x: Sequence[float]) -> np.ndarray:
        """Forward-mode gradient with respect to p."""
        self._check_dims(p, x)
        _, g = _eval_dual(self.root, p, x, "p", self.dp)
        return g

    def eval_array(self, p: Sequence[float], xs: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorized evaluation over broadcastable arrays of x values.

        Singular points yield NaN/inf instead of raising; intended for
        brute-force grid sweeps.
        """
        if len(p) != self.dp or len(xs) != self.dx:
            raise ValueError("dimension mismatch")
        shape = np.broadcast(*[np.asarray(a) for a in xs]).shape if xs else ()
        out = _eval_array(self.root, p, [np.asarray(a, dtype=float) for a in xs])
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else out

    # Compiled fast paths.  Same arithmetic as the recursive evaluator;
    # domain faults raise builtin exceptions instead of DomainError.

    def _fn(self, key: str) -> Callable:
        fn = self._fns.get(key)
        if fn is None:
            wrt = None if key == "value" else key.removeprefix("grad_")
            dim = {"value": 0, "grad_x": self.dx, "grad_p": self.dp}[key]
            fn = _compile(self.root, wrt, dim)
            self._fns[key] = fn
        return fn

    @property
    def value_fn(self) -> Callable:
        """``f(p, x) -> float``"""
        return self._fn("value")

    @property
    def value_gradx_fn(self) -> Callable:
        """``f(p, x) -> (float, tuple)`` with the x-gradient."""
        return self._fn("grad_x")

    @property
    def value_gradp_fn(self) -> Callable:
        """``f(p, x) -> (float, tuple)`` with the p-gradient."""
        return self._fn("grad_p")

    @property
    def uses_abs_of_x(self) -> bool:
        return _has_abs_of_x(self.root)

    def depends_on_x(self) -> bool:
        return _depends_on_x(self.root)

    def minus_constant(self, c: float) -> "Expr":
        """The expression shifted by a constant (used for level-set
        constraints)."""
        return Expr(Binary("sub", self.root, Const(float(c))), self.dp, self.dx)


def _check_indices(node: _Node, dp: int, dx: int) -> None:
    for sub in _walk(node):
        if isinstance(sub, Var):
            limit = dp if sub.kind == "p" else dx
            if not 1 <= sub.index <= limit:
                raise ValueError(
                    f"variable {sub.kind}{sub.index} out of range for dimensions (dp={dp}, dx={dx})"
                )
        if isinstance(sub, Pow) and sub.exponent < 0:
            raise ValueError("power exponents must be nonnegative integers")


def _walk(node: _Node) -> Iterator[_Node]:
    yield node
    match node:
        case Unary(child=c):
            yield from _walk(c)
        case Binary(left=l, right=r):
            yield from _walk(l)
            yield from _walk(r)
        case Pow(base=b):
            yield from _walk(b)
        case _:
            pass


def _has_abs_of_x(node: _Node) -> bool:
    for sub in _walk(node):
        if isinstance(sub, Unary) and sub.op == "abs" and _depends_on_x(sub.child):
            return True
    return False


def parse(text: str, dp: int, dx: int) -> Expr:
    """Parse ``text`` into an :class:`Expr` with declared dimensions.

    Raises :class:`ParseError` (with a byte offset) on malformed input,
    :class:`UnknownIdentifierError` for identifiers that are neither
    variables nor known functions, and :class:`IndexRangeError` for
    variable indices outside ``1..dp`` / ``1..dx``.
    """
    if dp < 0 or dx < 0:
        raise ValueError("dimensions must be nonnegative")
    root = _Parser(text, dp, dx).parse()
    return Expr(root, dp, dx)
