"""Scalar term expressions used to populate function dictionaries.

Grammar (whitespace-insensitive, ``*`` binds tighter than ``+``)::

    expr    := product ('+' product)*
    product := atom ('*' atom)*
    atom    := number | x<k> | u<k> | fn '(' expr ')' | '(' expr ')'
    fn      := sin | cos | tan | atan | tanh | ln

Numbers may carry a leading ``-`` sign. Variable indices are 1-based.
Evaluation accepts either a single point (vectors of shape ``(n,)``) or a
batch of points stacked column-wise (shape ``(n, K)``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "atan", "tanh", "ln")

_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "atan": np.arctan,
    "tanh": np.tanh,
    "ln": np.log,
}


class ExprSyntaxError(ValueError):
    """Malformed term source. ``pos`` is the 0-based offset of the problem."""

    def __init__(self, msg: str, src: str, pos: int):
        super().__init__(f"{msg} at position {pos}: {src!r}")
        self.src = src
        self.pos = pos


class IndexOutOfRange(ValueError):
    pass


class DomainError(ValueError):
    """A ``ln`` argument was not strictly positive."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "state" | "input"
    index: int  # 1-based

    def __post_init__(self):
        if self.kind not in ("state", "input"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.index < 1:
            raise IndexOutOfRange(f"variable index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Add:
    left: "TermExpr"
    right: "TermExpr"


@dataclass(frozen=True)
class Mul:
    left: "TermExpr"
    right: "TermExpr"


@dataclass(frozen=True)
class Func:
    name: str
    arg: "TermExpr"

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


TermExpr = Union[Const, Var, Add, Mul, Func]


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>[xu])(?P<idx>\d+)(?![A-Za-z_0-9])
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[+*()])
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", src, pos)
        kind = m.lastgroup
        if kind == "idx":
            kind = "var"
        if kind != "ws":
            tokens.append((kind, m.group(0), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, n: int, m: int):
        self.src = src
        self.n = n
        self.m = m
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.src, pos)

    def parse(self) -> TermExpr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", self.src, pos)
        return node

    def expr(self) -> TermExpr:
        node = self.product()
        while self.peek()[1] == "+":
            self.take()
            node = Add(node, self.product())
        return node

    def product(self) -> TermExpr:
        node = self.atom()
        while self.peek()[1] == "*":
            self.take()
            node = Mul(node, self.atom())
        return node

    def atom(self) -> TermExpr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "var":
            idx = int(val[1:])
            if val[0] == "x":
                if not 1 <= idx <= self.n:
                    raise IndexOutOfRange(
                        f"state index x{idx} out of range 1..{self.n} at position {pos}"
                    )
                return Var("state", idx)
            if not 1 <= idx <= self.m:
                raise IndexOutOfRange(
                    f"input index u{idx} out of range 1..{self.m} at position {pos}"
                )
            return Var("input", idx)
        if kind == "name":
            if val not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function {val!r}", self.src, pos)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(val, arg)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.src, pos)


def parse_term(src: str, n: int, m: int) -> TermExpr:
    """Parse ``src`` into a term tree over ``n`` states and ``m`` inputs."""
    return _Parser(src, n, m).parse()


def render_term(t: TermExpr) -> str:
    """Inverse of :func:`parse_term` (up to whitespace)."""
    if isinstance(t, Const):
        if not math.isfinite(t.value):
            raise ValueError("non-finite constants cannot be rendered")
        return repr(float(t.value))
    if isinstance(t, Var):
        return f"{'x' if t.kind == 'state' else 'u'}{t.index}"
    if isinstance(t, Func):
        return f"{t.name}({render_term(t.arg)})"
    if isinstance(t, Add):
        right = render_term(t.right)
        if isinstance(t.right, Add):
            right = f"({right})"
        return f"{render_term(t.left)} + {right}"
    if isinstance(t, Mul):
        parts = []
        for child, is_right in ((t.left, False), (t.right, True)):
            s = render_term(child)
            if isinstance(child, Add) or (is_right and isinstance(child, Mul)):
                s = f"({s})"
            parts.append(s)
        return " * ".join(parts)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# evaluation


def eval_term(t: TermExpr, x, u):
    """Evaluate ``t`` at state ``x`` and input ``u``.

    Works elementwise on batches: with ``x`` of shape ``(n, K)`` the result has
    shape ``(K,)`` (or is a scalar for variable-free subterms).
    """
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        src = x if t.kind == "state" else u
        return src[t.index - 1]
    if isinstance(t, Add):
        return eval_term(t.left, x, u) + eval_term(t.right, x, u)
    if isinstance(t, Mul):
        return eval_term(t.left, x, u) * eval_term(t.right, x, u)
    if isinstance(t, Func):
        a = eval_term(t.arg, x, u)
        if t.name == "ln" and np.any(np.asarray(a) <= 0):
            raise DomainError(f"ln argument not positive in {render_term(t)}")
        out = _NUMPY_FUNCS[t.name](a)
        return float(out) if np.ndim(out) == 0 else out
    raise TypeError(f"not a term: {t!r}")


def term_variables(t: TermExpr) -> set[Var]:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, Const):
        return set()
    if isinstance(t, Func):
        return term_variables(t.arg)
    return term_variables(t.left) | term_variables(t.right)


def map_variables(t: TermExpr, fn) -> TermExpr:
    """Rebuild ``t`` with every ``Var`` replaced by ``fn(var)``."""
    if isinstance(t, Var):
        return fn(t)
    if isinstance(t, Const):
        return t
    if isinstance(t, Func):
        return Func(t.name, map_variables(t.arg, fn))
    return type(t)(map_variables(t.left, fn), map_variables(t.right, fn))


def interval_bounds(t: TermExpr, x_lo, x_hi, u_lo=(), u_hi=()) -> tuple[float, float]:
    """Conservative enclosure of ``t`` over a box of states and inputs."""
    if isinstance(t, Const):
        return t.value, t.value
    if isinstance(t, Var):
        lo, hi = (x_lo, x_hi) if t.kind == "state" else (u_lo, u_hi)
        return float(lo[t.index - 1]), float(hi[t.index - 1])
    if isinstance(t, Add):
        a, b = interval_bounds(t.left, x_lo, x_hi, u_lo, u_hi)
        c, d = interval_bounds(t.right, x_lo, x_hi, u_lo, u_hi)
        return a + c, b + d
    if isinstance(t, Mul):
        if t.left == t.right:
            a, b = interval_bounds(t.left, x_lo, x_hi, u_lo, u_hi)
            sq = (a * a, b * b)
            lo = 0.0 if a <= 0.0 <= b else min(sq)
            return lo, max(sq)
        a, b = interval_bounds(t.left, x_lo, x_hi, u_lo, u_hi)
        c, d = interval_bounds(t.right, x_lo, x_hi, u_lo, u_hi)
        prods = (a * c, a * d, b * c, b * d)
        return min(prods), max(prods)
    if isinstance(t, Func):
        a, b = interval_bounds(t.arg, x_lo, x_hi, u_lo, u_hi)
        return _func_interval(t.name, a, b)
    raise TypeError(f"not a term: {t!r}")


def _func_interval(name: str, a: float, b: float) -> tuple[float, float]:
    if name in ("atan", "tanh"):
        f = _NUMPY_FUNCS[name]
        return float(f(a)), float(f(b))
    if name == "ln":
        if a <= 0:
            return -math.inf, math.log(b) if b > 0 else -math.inf
        return math.log(a), math.log(b)
    if name == "tan":
        # monotone between consecutive poles
        k = math.floor((a + math.pi / 2) / math.pi)
        if b - a >= math.pi or (b + math.pi / 2) / math.pi >= k + 1:
            return -math.inf, math.inf
        return math.tan(a), math.tan(b)
    # sin / cos: endpoints plus any interior extrema
    if b - a >= 2 * math.pi:
        return -1.0, 1.0
    f = math.sin if name == "sin" else math.cos
    vals = [f(a), f(b)]
    shift = math.pi / 2 if name == "sin" else 0.0
    k = math.ceil((a - shift) / math.pi)
    while shift + k * math.pi <= b:
        vals.append(f(shift + k * math.pi))
        k += 1
    return min(vals), max(vals)


# ---------------------------------------------------------------------------
# dictionaries


class DictionaryError(ValueError):
    pass


@dataclass(frozen=True)
class Dictionary:
    """Ordered term library ``[x; u; Psi(x, u)]``."""

    n: int
    m: int
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        n, m = self.n, self.m
        if n < 1 or m < 0:
            raise DictionaryError(f"invalid dimensions n={n}, m={m}")
        if len(self.terms) < n + m:
            raise DictionaryError(
                f"dictionary needs at least n+m={n + m} terms, got {len(self.terms)}"
            )
        expected = [Var("state", i) for i in range(1, n + 1)]
        expected += [Var("input", j) for j in range(1, m + 1)]
        for i, (got, want) in enumerate(zip(self.terms, expected)):
            if got != want:
                raise DictionaryError(
                    f"term {i} must be {render_term(want)}, got {render_term(got)}"
                )
        for t in self.terms:
            vs = term_variables(t)
            if not vs:
                raise DictionaryError(f"constant term {render_term(t)} not allowed")
            for v in vs:
                limit = n if v.kind == "state" else m
                if v.index > limit:
                    raise IndexOutOfRange(f"{render_term(v)} exceeds dimension {limit}")

    @property
    def N(self) -> int:
        return len(self.terms)

    @property
    def nonlinear(self) -> tuple:
        return self.terms[self.n + self.m :]

    @classmethod
    def from_strings(cls, n: int, m: int, srcs: Sequence[str]) -> "Dictionary":
        return cls(n, m, tuple(parse_term(s, n, m) for s in srcs))

    def to_strings(self) -> list[str]:
        return [render_term(t) for t in self.terms]

    def check_ln_domain(self, x_lo, x_hi, u_lo=(), u_hi=()) -> None:
        """Raise DomainError unless every ``ln`` argument is provably positive
        on the given box."""

        def walk(t):
            if isinstance(t, Func):
                if t.name == "ln":
                    lo, _ = interval_bounds(t.arg, x_lo, x_hi, u_lo, u_hi)
                    if not lo > 0:
                        raise DomainError(
                            f"cannot prove {render_term(t.arg)} > 0 on the analysis box"
                        )
                walk(t.arg)
            elif isinstance(t, (Add, Mul)):
                walk(t.left)
                walk(t.right)

        for t in self.terms:
            walk(t)


def eval_dictionary(d: Dictionary, x, u=None) -> np.ndarray:
    """Stack all terms of ``d``; returns shape ``(N,)`` or ``(N, K)``."""
    x = np.asarray(x, dtype=float)
    u = np.zeros((0,) + x.shape[1:]) if u is None else np.asarray(u, dtype=float)
    if x.shape[0] != d.n or u.shape[0] != d.m:
        raise ValueError(
            f"expected x of length {d.n} and u of length {d.m}, "
            f"got {x.shape[0]} and {u.shape[0]}"
        )
    out = np.empty((d.N,) + x.shape[1:])
    out[: d.n] = x
    out[d.n : d.n + d.m] = u
    for i, t in enumerate(d.nonlinear, start=d.n + d.m):
        out[i] = eval_term(t, x, u)
    return out
