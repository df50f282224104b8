"""Expression language for tensor-field components.

Grammar (EBNF)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" integer)?
    unary  := "-" unary | atom
    atom   := number | ident | func "(" expr ")" | "(" expr ")"

Identifiers are ``[utA][0-9]+`` (the letter is cosmetic, the 1-based index
selects the chart coordinate); numbers are decimals with optional exponent;
functions are exp, log, sin, cos, sqrt.  Precedence is ``^`` above unary
minus above ``* /`` above ``+ -``; binary operators associate left, chained
integer exponents fold right.

Expressions evaluate over floats, numpy arrays or :class:`~haantjes.jets.Jet`
values through the same code path, and support exact symbolic
differentiation and substitution (used for chart changes and for deriving
packaged scenarios from potentials).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import ArityError, EvalError, ParseError, UnknownVariable

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "Call",
    "parse_expr",
    "to_source",
    "diff",
    "substitute",
    "FUNCTIONS",
]

FUNCTIONS = {
    "exp": jets.exp,
    "log": jets.log,
    "sin": jets.sin,
    "cos": jets.cos,
    "sqrt": jets.sqrt,
}


class Expr:
    """Base class for AST nodes."""

    __slots__ = ()

    def eval(self, values):
        """Evaluate with ``values[i]`` bound to coordinate i (0-based)."""
        raise NotImplementedError

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float

    def eval(self, values):
        return self.value


@dataclass(frozen=True, slots=True)
class Var(Expr):
    index: int  # 0-based coordinate index

    def eval(self, values):
        return values[self.index]


@dataclass(frozen=True, slots=True)
class Add(Expr):
    a: Expr
    b: Expr

    def eval(self, values):
        return self.a.eval(values) + self.b.eval(values)


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def eval(self, values):
        return self.a.eval(values) - self.b.eval(values)


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def eval(self, values):
        return self.a.eval(values) * self.b.eval(values)


@dataclass(frozen=True, slots=True)
class Div(Expr):
    a: Expr
    b: Expr

    def eval(self, values):
        num = self.a.eval(values)
        den = self.b.eval(values)
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return num / den
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise EvalError(f"division by zero in {self}") from exc


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def eval(self, values):
        base = self.base.eval(values)
        if self.exponent < 0 and isinstance(base, (int, float)) and base == 0.0:
            raise EvalError(f"zero raised to negative power in {self}")
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return base**self.exponent
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise EvalError(f"zero raised to negative power in {self}") from exc


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    a: Expr

    def eval(self, values):
        return -self.a.eval(values)


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    arg: Expr

    def eval(self, values):
        return FUNCTIONS[self.fn](self.arg.eval(values))


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z]+\d*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_IDENT_RE = re.compile(r"[utA](\d+)\Z")


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            text = m.group()
            if kind == "op":
                kind = text
            tokens.append((kind, text, pos))
        pos = m.end()
    tokens.append(("eof", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, dim=None):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2], {kind})
        return self.advance()

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2], {"eof"})
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self):
        # unary minus binds looser than ^, per the declared precedence
        if self.peek()[0] == "-":
            self.advance()
            inner = self.factor()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        base = self.atom()
        if self.peek()[0] == "^":
            k = self.exponent_chain()
            if k == 1:
                return base
            return Pow(base, k)
        return base

    def exponent_chain(self):
        # ^ is right-associative; constant integer exponents fold numerically
        self.expect("^")
        sign = 1
        if self.peek()[0] == "-":
            self.advance()
            sign = -1
        tok = self.peek()
        if tok[0] != "number" or not re.fullmatch(r"\d+", tok[1]):
            raise ParseError(f"expected integer exponent, found {tok[1]!r}", tok[2], {"integer"})
        self.advance()
        k = sign * int(tok[1])
        if self.peek()[0] == "^":
            outer = self.exponent_chain()
            if outer < 0:
                raise ParseError("negative exponent in exponent chain", tok[2], {"integer"})
            k = k**outer
        return k

    def atom(self):
        tok = self.peek()
        kind, text, pos = tok
        if kind == "number":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != 1:
                    raise ArityError(f"{text} takes 1 argument, got {len(args)}")
                return Call(text, args[0])
            m = _IDENT_RE.fullmatch(text)
            if m is None:
                raise ParseError(f"unknown identifier {text!r}", pos, {"variable", "function"})
            index = int(m.group(1))
            if index < 1:
                raise UnknownVariable(f"variable {text!r}: indices start at 1")
            if self.dim is not None and index > self.dim:
                raise UnknownVariable(f"variable {text!r} exceeds chart dimension {self.dim}")
            return Var(index - 1)
        if kind == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(
            f"expected an operand, found {text!r}" if text else "unexpected end of input",
            pos,
            {"number", "variable", "function", "("},
        )


def parse_expr(src, dim=None):
    """Parse ``src`` into an :class:`Expr`.

    ``dim``, when given, bounds the variable indices (raising
    :class:`UnknownVariable` beyond it).
    """
    return _Parser(src, dim).parse()


# -- pretty printer ----------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_UNARY, _LEVEL_POW, _LEVEL_ATOM = range(1, 6)


def _fmt_num(value):
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _render(e, level, letter):
    if isinstance(e, Num):
        text = _fmt_num(e.value)
        mine = _LEVEL_UNARY if e.value < 0 else _LEVEL_ATOM
    elif isinstance(e, Var):
        return f"{letter}{e.index + 1}"
    elif isinstance(e, Add):
        text = f"{_render(e.a, _LEVEL_ADD, letter)} + {_render(e.b, _LEVEL_ADD + 1, letter)}"
        mine = _LEVEL_ADD
    elif isinstance(e, Sub):
        text = f"{_render(e.a, _LEVEL_ADD, letter)} - {_render(e.b, _LEVEL_ADD + 1, letter)}"
        mine = _LEVEL_ADD
    elif isinstance(e, Mul):
        text = f"{_render(e.a, _LEVEL_MUL, letter)}*{_render(e.b, _LEVEL_MUL + 1, letter)}"
        mine = _LEVEL_MUL
    elif isinstance(e, Div):
        text = f"{_render(e.a, _LEVEL_MUL, letter)}/{_render(e.b, _LEVEL_MUL + 1, letter)}"
        mine = _LEVEL_MUL
    elif isinstance(e, Neg):
        text = f"-{_render(e.a, _LEVEL_UNARY, letter)}"
        mine = _LEVEL_UNARY
    elif isinstance(e, Pow):
        text = f"{_render(e.base, _LEVEL_ATOM, letter)}^{e.exponent}"
        mine = _LEVEL_POW
    elif isinstance(e, Call):
        return f"{e.fn}({_render(e.arg, _LEVEL_ADD, letter)})"
    else:  # pragma: no cover
        raise TypeError(f"not an Expr: {e!r}")
    if mine < level:
        return f"({text})"
    return text


def to_source(e, letter="u"):
    """Render an AST back to parseable source (parse/print fixed point)."""
    return _render(e, _LEVEL_ADD, letter)


# -- symbolic calculus -------------------------------------------------------

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_zero(e):
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e):
    return isinstance(e, Num) and e.value == 1.0


def add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_zero(a):
        return neg(b)
    return Sub(a, b)


def mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_zero(a):
        return _ZERO
    if _is_one(b):
        return a
    return Div(a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def power(a, k):
    if k == 0:
        return _ONE
    if k == 1:
        return a
    if isinstance(a, Num):
        return Num(a.value**k)
    return Pow(a, k)


def diff(e, i):
    """Exact partial derivative of ``e`` with respect to coordinate ``i``."""
    if isinstance(e, Num):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.index == i else _ZERO
    if isinstance(e, Add):
        return add(diff(e.a, i), diff(e.b, i))
    if isinstance(e, Sub):
        return sub(diff(e.a, i), diff(e.b, i))
    if isinstance(e, Mul):
        return add(mul(diff(e.a, i), e.b), mul(e.a, diff(e.b, i)))
    if isinstance(e, Div):
        num = sub(mul(diff(e.a, i), e.b), mul(e.a, diff(e.b, i)))
        return div(num, power(e.b, 2))
    if isinstance(e, Pow):
        return mul(mul(Num(float(e.exponent)), power(e.base, e.exponent - 1)), diff(e.base, i))
    if isinstance(e, Neg):
        return neg(diff(e.a, i))
    if isinstance(e, Call):
        inner = diff(e.arg, i)
        if e.fn == "exp":
            outer = Call("exp", e.arg)
        elif e.fn == "log":
            return div(inner, e.arg)
        elif e.fn == "sin":
            outer = Call("cos", e.arg)
        elif e.fn == "cos":
            outer = neg(Call("sin", e.arg))
        elif e.fn == "sqrt":
            return div(inner, mul(Num(2.0), Call("sqrt", e.arg)))
        else:  # pragma: no cover
            raise ValueError(f"unknown function {e.fn}")
        return mul(outer, inner)
    raise TypeError(f"not an Expr: {e!r}")  # pragma: no cover


def substitute(e, replacements):
    """Replace coordinates by expressions: ``replacements[i]`` for Var(i).

    Used to compose component functions with a coordinate change.
    """
    if isinstance(e, Num):
        return e
    if isinstance(e, Var):
        return replacements[e.index]
    if isinstance(e, Add):
        return add(substitute(e.a, replacements), substitute(e.b, replacements))
    if isinstance(e, Sub):
        return sub(substitute(e.a, replacements), substitute(e.b, replacements))
    if isinstance(e, Mul):
        return mul(substitute(e.a, replacements), substitute(e.b, replacements))
    if isinstance(e, Div):
        return div(substitute(e.a, replacements), substitute(e.b, replacements))
    if isinstance(e, Pow):
        return power(substitute(e.base, replacements), e.exponent)
    if isinstance(e, Neg):
        return neg(substitute(e.a, replacements))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, replacements))
    raise TypeError(f"not an Expr: {e!r}")  # pragma: no cover
