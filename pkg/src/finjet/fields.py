"""
Coefficient-expression language.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" int ] ;
    int     = [ "-" ] DIGITS | "(" [ "-" ] DIGITS ")" ;
    atom    = NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")" ;
    VAR     = ("x" | "y") DIGITS ;              (1-based index)
    FUNC    = "exp" | "log" | "sin" | "cos" | "sqrt" ;
    NUMBER  = DIGITS [ "." DIGITS ] [ ("e" | "E") [ "+" | "-" ] DIGITS ]
            | "." DIGITS [ exponent ] ;

``^`` binds tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``. There is
no implicit multiplication. ``y`` variables are only accepted for fields that
live on the slit tangent bundle.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .errors import ParseError, PreconditionError
from .jets import Jet

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: Expr


@dataclass(frozen=True)
class Add:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow:
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: Expr


Expr = Union[Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call]


# -- tokenizer / parser -------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _byte(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text, base_dim, fiber):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.base_dim = base_dim
        self.fiber = fiber

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, _byte(self.text, tok[2]))

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Pow(base, self.integer())
        return base

    def integer(self):
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        tok = self.take()
        if tok[0] != "num" or not tok[1].isdigit():
            raise self.error("exponent must be an integer literal", tok)
        if paren:
            self.expect(")")
        return sign * int(tok[1])

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            m = re.fullmatch(r"([xy])(\d+)", text)
            if m is None:
                raise self.error(f"unknown identifier {text!r}", tok)
            var_kind, idx = m.group(1), int(m.group(2))
            if var_kind == "y" and not self.fiber:
                raise self.error(f"fiber variable {text!r} not allowed in a base field", tok)
            if not 1 <= idx <= self.base_dim:
                raise self.error(
                    f"variable {text!r} out of range for dimension {self.base_dim}", tok
                )
            return Var(var_kind, idx)
        raise self.error(f"unexpected token {text or 'end of input'!r}", tok)


def parse_expr(text: str, base_dim: int, fiber: bool = False) -> Expr:
    """Parse ``text`` into an expression tree."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text, base_dim, fiber).parse()


# -- printing -----------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def to_text(e: Expr) -> str:
    """Render an expression so that ``parse_expr(to_text(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        if type(e.arg) in (Add, Sub, Mul, Div):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if not isinstance(e.base, (Num, Var, Call)) or (isinstance(e.base, Num) and e.base.value < 0):
            base = f"({base})"
        return f"{base}^{e.exponent}" if e.exponent >= 0 else f"{base}^({e.exponent})"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    p = _PREC[type(e)]
    left = to_text(e.left)
    if type(e.left) in _PREC and _PREC[type(e.left)] < p:
        left = f"({left})"
    right = to_text(e.right)
    # left associativity: an equal-precedence right operand needs parentheses
    if type(e.right) in _PREC and _PREC[type(e.right)] <= p and not isinstance(e.right, (Neg, Pow)):
        right = f"({right})"
    return f"{left} {op} {right}"


# -- evaluation ---------------------------------------------------------------

_FUNCS = {"exp": jets.exp, "log": jets.log, "sin": jets.sin, "cos": jets.cos, "sqrt": jets.sqrt}


def evaluate(e: Expr, xs: Sequence, ys: Sequence | None = None):
    """Evaluate ``e`` with x-variables bound to ``xs`` and y-variables to ``ys``.

    Inputs may be floats or :class:`Jet` objects; mixed inputs are fine.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.kind == "x":
            return xs[e.index - 1]
        if ys is None:
            raise PreconditionError("fiber variable used without a fiber point")
        return ys[e.index - 1]
    if isinstance(e, Neg):
        return -evaluate(e.arg, xs, ys)
    if isinstance(e, Add):
        return evaluate(e.left, xs, ys) + evaluate(e.right, xs, ys)
    if isinstance(e, Sub):
        return evaluate(e.left, xs, ys) - evaluate(e.right, xs, ys)
    if isinstance(e, Mul):
        return evaluate(e.left, xs, ys) * evaluate(e.right, xs, ys)
    if isinstance(e, Div):
        return _divide(evaluate(e.left, xs, ys), evaluate(e.right, xs, ys))
    if isinstance(e, Pow):
        base = evaluate(e.base, xs, ys)
        if isinstance(base, Jet):
            return base ** e.exponent
        if e.exponent < 0 and base == 0:
            return _divide(1.0, 0.0)
        return float(base) ** e.exponent
    if isinstance(e, Call):
        return _FUNCS[e.func](evaluate(e.arg, xs, ys))
    raise TypeError(f"not an expression node: {e!r}")


def _divide(a, b):
    return a * jets.reciprocal(b)


def differentiate(e: Expr, kind: str, index: int) -> Expr:
    """Symbolic partial derivative with respect to variable ``kind``+``index``."""
    d = lambda u: differentiate(u, kind, index)
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if (e.kind, e.index) == (kind, index) else 0.0)
    if isinstance(e, Neg):
        return _neg(d(e.arg))
    if isinstance(e, Add):
        return _add(d(e.left), d(e.right))
    if isinstance(e, Sub):
        return _sub(d(e.left), d(e.right))
    if isinstance(e, Mul):
        return _add(_mul(d(e.left), e.right), _mul(e.left, d(e.right)))
    if isinstance(e, Div):
        num = _sub(_mul(d(e.left), e.right), _mul(e.left, d(e.right)))
        return _div(num, Pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Num(0.0)
        inner = e.base if e.exponent == 2 else Pow(e.base, e.exponent - 1)
        if e.exponent == 1:
            inner = Num(1.0)
        return _mul(_mul(Num(float(e.exponent)), inner), d(e.base))
    if isinstance(e, Call):
        du = d(e.arg)
        if e.func == "exp":
            outer = e
        elif e.func == "log":
            return _div(du, e.arg)
        elif e.func == "sin":
            outer = Call("cos", e.arg)
        elif e.func == "cos":
            outer = Neg(Call("sin", e.arg))
        else:  # sqrt
            return _div(du, _mul(Num(2.0), e))
        return _mul(outer, du)
    raise TypeError(f"not an expression node: {e!r}")


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def _add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


def _mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return Num(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Mul(a, b)


def _div(a, b):
    if _is(a, 0.0):
        return Num(0.0)
    return Div(a, b)


# -- fields -------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A parsed scalar coefficient function on M (``fiber=False``) or TM minus 0."""

    expr: Expr
    base_dim: int
    fiber: bool = False

    @classmethod
    def parse(cls, text: str, base_dim: int, fiber: bool = False) -> ScalarField:
        return cls(parse_expr(text, base_dim, fiber), base_dim, fiber)

    @classmethod
    def constant(cls, value: float, base_dim: int, fiber: bool = False) -> ScalarField:
        return cls(Num(float(value)), base_dim, fiber)

    def __call__(self, xs, ys=None):
        return evaluate(self.expr, xs, ys)

    def diff(self, kind: str, index: int) -> ScalarField:
        return ScalarField(differentiate(self.expr, kind, index), self.base_dim, self.fiber)

    def __str__(self):
        return to_text(self.expr)


def as_field(obj, base_dim: int, fiber: bool = False) -> ScalarField:
    """Coerce a string, number or ScalarField into a ScalarField."""
    if isinstance(obj, ScalarField):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return ScalarField.constant(float(obj), base_dim, fiber)
    return ScalarField.parse(str(obj), base_dim, fiber)


def eval_field(field: ScalarField, point, order: int) -> Jet:
    """Jet of ``field`` at ``point``; fiber fields take the point ``(x, y)``."""
    point = np.asarray(point, dtype=float).ravel()
    n = field.base_dim
    expected = 2 * n if field.fiber else n
    if point.size != expected:
        raise PreconditionError(f"point has {point.size} coordinates, expected {expected}")
    v = jets.lift_variables(point, order)
    out = field(v[:n], v[n:] if field.fiber else None)
    if not isinstance(out, Jet):
        out = Jet.constant(out, point.size, order)
    return out


@dataclass(frozen=True)
class SymbolField:
    """Symmetric contravariant 2-tensor field on M carrying a density weight."""

    components: tuple
    weight: float = 0.0

    def __init__(self, components, weight: float = 0.0, base_dim: int | None = None):
        n = base_dim if base_dim is not None else len(components)
        if len(components) != n or any(len(row) != n for row in components):
            raise PreconditionError(f"symbol must be {n}x{n}")
        rows = tuple(tuple(as_field(c, n) for c in row) for row in components)
        for i in range(n):
            for j in range(i + 1, n):
                if rows[i][j].expr != rows[j][i].expr:
                    raise PreconditionError(f"symbol is not symmetric at ({i},{j})")
        object.__setattr__(self, "components", rows)
        object.__setattr__(self, "weight", float(weight))

    @property
    def n(self) -> int:
        return len(self.components)

    def __call__(self, xs):
        """Component matrix at ``xs``; a tensor jet when ``xs`` are jets."""
        vals = [[c(xs) for c in row] for row in self.components]
        if any(isinstance(v, Jet) for row in vals for v in row):
            return jets.stack(vals)
        return np.array(vals, dtype=float)

    def with_weight(self, weight: float) -> SymbolField:
        return SymbolField(self.components, weight)

    def to_dict(self):
        return {"components": [[str(c) for c in row] for row in self.components], "weight": self.weight}
