"""Tiny closed-form expression language for chart data.

Metric entries, spanning fields and weight fields are given as strings like
``"exp(0.2*sin(2*pi*x0))"`` over chart coordinates ``x0..x{d-1}``.  The same
AST evaluates over plain floats/arrays and over :class:`~foliate.jets.Jet2`
second-order jets, so one definition yields values, gradients and Hessians.

Grammar (EBNF, also in docs/grammar.md)::

    expr    = term , { ("+" | "-") , term } ;
    term    = factor , { ("*" | "/") , factor } ;
    factor  = "-" , factor | power ;
    power   = atom , [ "^" , factor ] ;
    atom    = number | coord | func , "(" , expr , ")" | "(" , expr , ")"
            | "pi" | "e" ;
    coord   = "x" , digit , { digit } ;
    func    = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt"
            | "sinh" | "cosh" | "tanh" ;

``^`` binds tightest and is right-associative; unary minus binds next
(so ``-x0^2 == -(x0^2)``); ``*``/``/`` then ``+``/``-`` are left-associative.
``pi`` and ``e`` parse to numeric literals.  Integer exponents are detected
syntactically and evaluated by repeated multiplication, so ``x0^2`` is exact
for any sign of ``x0``.

Syntax errors raise :class:`~foliate.errors.ParseError` with the character
offset of the offending token; evaluation domain errors raise
:class:`~foliate.errors.DomainError` carrying the offending subexpression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError
from .jets import Jet2, apply_named, jet_vars

__all__ = [
    "Expr", "Num", "Coord", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "parse", "to_source", "eval_value", "eval_jet", "differentiate",
    "max_coord", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}


class Expr:
    """Base class for AST nodes (frozen dataclasses, structural equality)."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Coord(Expr):
    index: int


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


_COORD = re.compile(r"x(\d+)\Z")


class _Parser:
    def __init__(self, tokens, dim: int | None):
        self.tokens = tokens
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.next()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                rhs = self.parse_term()
                node = Add(node, rhs) if text == "+" else Sub(node, rhs)
            else:
                return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                rhs = self.parse_factor()
                node = Mul(node, rhs) if text == "*" else Div(node, rhs)
            else:
                return node

    def parse_factor(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.next()
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.next()
            return Pow(base, self.parse_factor())
        return base

    def parse_atom(self) -> Expr:
        kind, text, pos = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(text, arg)
            m = _COORD.match(text)
            if m:
                index = int(m.group(1))
                if self.dim is not None and index >= self.dim:
                    raise ParseError(
                        f"coordinate x{index} out of range for a {self.dim}-dimensional chart",
                        pos)
                return Coord(index)
            raise ParseError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)


def parse(src: str, dim: int | None = None) -> Expr:
    """Parse ``src`` into an AST.

    If ``dim`` is given, coordinates ``x{i}`` with ``i >= dim`` are rejected
    with a positioned :class:`ParseError`.
    """
    parser = _Parser(_tokenize(src), dim)
    node = parser.parse_expr()
    kind, text, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing token {text!r}", pos)
    return node


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 5)


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(e: Expr) -> str:
    """Render an AST back to source; ``parse(to_source(e)) == e`` holds
    structurally for any tree built from nonnegative ``Num`` literals."""
    match e:
        case Num(value=v):
            return _fmt_num(v)
        case Coord(index=i):
            return f"x{i}"
        case Neg(arg=a):
            inner = to_source(a)
            return f"-({inner})" if _prec(a) < 3 else f"-{inner}"
        case Add(left=a, right=b) | Sub(left=a, right=b):
            op = "+" if isinstance(e, Add) else "-"
            ls = to_source(a) if _prec(a) >= 1 else f"({to_source(a)})"
            rs = to_source(b) if _prec(b) > 1 else f"({to_source(b)})"
            return f"{ls}{op}{rs}"
        case Mul(left=a, right=b) | Div(left=a, right=b):
            op = "*" if isinstance(e, Mul) else "/"
            ls = to_source(a) if _prec(a) >= 2 else f"({to_source(a)})"
            rs = to_source(b) if _prec(b) > 2 else f"({to_source(b)})"
            return f"{ls}{op}{rs}"
        case Pow(base=a, exponent=b):
            ls = to_source(a) if _prec(a) > 4 else f"({to_source(a)})"
            # exponent position admits '-' and chained '^' without parens
            rs = to_source(b) if _prec(b) >= 3 else f"({to_source(b)})"
            return f"{ls}^{rs}"
        case Call(func=f, arg=a):
            return f"{f}({to_source(a)})"
    raise TypeError(f"not an Expr: {e!r}")


def max_coord(e: Expr) -> int:
    """Largest coordinate index appearing in ``e`` (-1 if none)."""
    match e:
        case Num():
            return -1
        case Coord(index=i):
            return i
        case Neg(arg=a) | Call(arg=a):
            return max_coord(a)
        case Add(left=a, right=b) | Sub(left=a, right=b) | Mul(left=a, right=b) \
                | Div(left=a, right=b) | Pow(base=a, exponent=b):
            return max(max_coord(a), max_coord(b))
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _is_int_literal(e: Expr) -> int | None:
    """Return the integer exponent if ``e`` is an integral literal (or its
    negation), else None.  Detection is syntactic, per the grammar note."""
    match e:
        case Num(value=v) if v == int(v):
            return int(v)
        case Neg(arg=Num(value=v)) if v == int(v):
            return -int(v)
    return None


def _eval(e: Expr, coords):
    """Evaluate over any scalar family: floats, numpy arrays, or Jet2."""
    match e:
        case Num(value=v):
            return v
        case Coord(index=i):
            return coords[i]
        case Neg(arg=a):
            return -_eval(a, coords)
        case Add(left=a, right=b):
            return _eval(a, coords) + _eval(b, coords)
        case Sub(left=a, right=b):
            return _eval(a, coords) - _eval(b, coords)
        case Mul(left=a, right=b):
            return _eval(a, coords) * _eval(b, coords)
        case Div(left=a, right=b):
            try:
                return _eval(a, coords) / _eval(b, coords)
            except DomainError as err:
                raise _attach(err, e) from None
        case Pow(base=a, exponent=b):
            base = _eval(a, coords)
            n = _is_int_literal(b)
            try:
                if n is not None:
                    return _int_pow_value(base, n)
                return base ** _eval(b, coords)
            except DomainError as err:
                raise _attach(err, e) from None
        case Call(func=f, arg=a):
            try:
                return apply_named(f, _eval(a, coords))
            except DomainError as err:
                raise _attach(err, e) from None
    raise TypeError(f"not an Expr: {e!r}")


def _attach(err: DomainError, e: Expr) -> DomainError:
    if err.expr_text is None:
        return DomainError(str(err), to_source(e))
    return err


def _int_pow_value(base, n: int):
    if isinstance(base, Jet2):
        return base._int_pow(n)
    if n < 0:
        if np.any(np.asarray(base) == 0.0):
            raise DomainError("division by zero")
        base = 1.0 / base
        n = -n
    result = None
    b = base
    while n:
        if n & 1:
            result = b if result is None else result * b
        n >>= 1
        if n:
            b = b * b
    return 1.0 if result is None else result


def eval_value(e: Expr, p) -> np.ndarray | float:
    """Evaluate at point(s) ``p`` of shape ``(..., d)``.

    The dtype of ``p`` is respected (float64 or longdouble), which test
    oracles use for extended-precision finite differences.
    """
    p = np.asarray(p)
    coords = [p[..., i] for i in range(p.shape[-1])]
    return _eval(e, coords)


def eval_jet(e: Expr, p) -> Jet2:
    """Evaluate to a second-order jet at point(s) ``p`` of shape ``(..., d)``.

    Constant subtrees stay plain floats internally; the result is lifted to a
    Jet2 of the right batch shape even if ``e`` does not involve coordinates.
    """
    p = np.asarray(p, dtype=float)
    dim = p.shape[-1]
    out = _eval(e, jet_vars(p, dim))
    if isinstance(out, Jet2):
        return out
    batch = p.shape[:-1]
    return Jet2.constant(out, dim, batch)


# ---------------------------------------------------------------------------
# symbolic differentiation (used to build exact gradient fields and as an
# independent cross-check of jet arithmetic)
# ---------------------------------------------------------------------------

def _simp_add(a: Expr, b: Expr) -> Expr:
    if a == Num(0.0):
        return b
    if b == Num(0.0):
        return a
    return Add(a, b)


def _simp_mul(a: Expr, b: Expr) -> Expr:
    if a == Num(0.0) or b == Num(0.0):
        return Num(0.0)
    if a == Num(1.0):
        return b
    if b == Num(1.0):
        return a
    return Mul(a, b)


def differentiate(e: Expr, i: int) -> Expr:
    """Exact partial derivative d(e)/d(x_i) as a new AST."""
    match e:
        case Num():
            return Num(0.0)
        case Coord(index=j):
            return Num(1.0) if j == i else Num(0.0)
        case Neg(arg=a):
            da = differentiate(a, i)
            return Num(0.0) if da == Num(0.0) else Neg(da)
        case Add(left=a, right=b):
            da, db = differentiate(a, i), differentiate(b, i)
            if db == Num(0.0):
                return da
            if da == Num(0.0):
                return db
            return Add(da, db)
        case Sub(left=a, right=b):
            da, db = differentiate(a, i), differentiate(b, i)
            if db == Num(0.0):
                return da
            if da == Num(0.0):
                return Neg(db)
            return Sub(da, db)
        case Mul(left=a, right=b):
            return _simp_add(_simp_mul(differentiate(a, i), b),
                             _simp_mul(a, differentiate(b, i)))
        case Div(left=a, right=b):
            num = Sub(_simp_mul(differentiate(a, i), b),
                      _simp_mul(a, differentiate(b, i)))
            return Div(num, Pow(b, Num(2.0)))
        case Pow(base=a, exponent=b):
            n = _is_int_literal(b)
            if n is not None:
                return _simp_mul(Mul(Num(float(n)), Pow(a, Num(float(n - 1)))),
                                 differentiate(a, i))
            # b^a with general exponent: d = b^a * (b' log a ... ) general rule
            return _simp_mul(Pow(a, b),
                             _simp_add(_simp_mul(differentiate(b, i), Call("log", a)),
                                       Div(_simp_mul(b, differentiate(a, i)), a)))
        case Call(func=f, arg=a):
            da = differentiate(a, i)
            if da == Num(0.0):
                return Num(0.0)
            outer = {
                "sin": lambda u: Call("cos", u),
                "cos": lambda u: Neg(Call("sin", u)),
                "tan": lambda u: Add(Num(1.0), Pow(Call("tan", u), Num(2.0))),
                "exp": lambda u: Call("exp", u),
                "log": lambda u: Div(Num(1.0), u),
                "sqrt": lambda u: Div(Num(0.5), Call("sqrt", u)),
                "sinh": lambda u: Call("cosh", u),
                "cosh": lambda u: Call("sinh", u),
                "tanh": lambda u: Sub(Num(1.0), Pow(Call("tanh", u), Num(2.0))),
            }[f](a)
            return _simp_mul(outer, da)
    raise TypeError(f"not an Expr: {e!r}")
