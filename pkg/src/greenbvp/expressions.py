"""Coefficient expressions in the variable ``t`` and the parameter ``lambda``.

Expressions are parsed once into an immutable AST and evaluated many times,
so that differential operators can be described by data (strings in a JSON
config) instead of Python callables.  The grammar covers polynomials plus
``sin``/``cos``/``exp``/``abs``, with conventional precedence
(``^`` > unary ``-`` > ``*`` ``/`` > ``+`` ``-``) and left associativity.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Neg",
    "Binary",
    "Power",
    "Call",
    "ExprAst",
    "ParseError",
    "EvalError",
    "parse_expression",
    "eval_expr",
    "to_string",
    "uses_t",
    "uses_lambda",
    "compile_expr",
]

_FUNCTIONS = ("sin", "cos", "exp", "abs")
_VARIABLES = ("t", "lambda")


class ParseError(ValueError):
    """Syntax or lexical error, carrying the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(ArithmeticError):
    """Division by zero or a non-finite intermediate during evaluation."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "lambda"


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str  # one of "+", "-", "*", "/"
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Power:
    base: "ExprAst"
    exponent: int  # nonnegative integer


@dataclass(frozen=True)
class Call:
    func: str  # one of sin, cos, exp, abs
    arg: "ExprAst"


ExprAst = Union[Const, Var, Neg, Binary, Power, Call]


_TOKEN_RE = re.compile(
    r"""
    (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("eof", "", len(self.src))

    def advance(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        self.advance()

    # expr := term (("+"|"-") term)*
    def expr(self) -> ExprAst:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(text, node, self.term())
            else:
                return node

    # term := unary (("*"|"/") unary)*
    def term(self) -> ExprAst:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(text, node, self.unary())
            else:
                return node

    # unary := "-" unary | power
    def unary(self) -> ExprAst:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    # power := atom ("^" integer)*
    def power(self) -> ExprAst:
        node = self.atom()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == "^":
                self.advance()
                node = Power(node, self.exponent())
            else:
                return node

    def exponent(self) -> int:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            raise ParseError("negative exponent is not allowed", pos)
        if kind != "number":
            raise ParseError("expected a nonnegative integer exponent", pos)
        if not text.isdigit():
            raise ParseError(f"non-integer exponent {text!r}", pos)
        self.advance()
        return int(text)

    def atom(self) -> ExprAst:
        kind, text, pos = self.advance()
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            if text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text == "t":
                return Var("t")
            if text == "lambda":
                return Var("lambda")
            raise ParseError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)


def parse_expression(src: str) -> ExprAst:
    """Parse ``src`` into an immutable expression tree.

    Raises :class:`ParseError` (with position) on empty input, syntax errors,
    unknown identifiers, and non-integer or negative exponents.
    """
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(src)
    node = parser.expr()
    kind, text, pos = parser.peek()
    if kind != "eof":
        raise ParseError(f"unexpected trailing input {text!r}", pos)
    return node


_CALL_TABLE = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs}


def eval_expr(ast: ExprAst, t: float, lam: float) -> float:
    """Evaluate the tree at ``(t, lambda)`` in double precision.

    Division by zero and non-finite intermediates raise :class:`EvalError`.
    """
    value = _eval(ast, float(t), float(lam))
    if not math.isfinite(value):
        raise EvalError(f"non-finite result {value!r}")
    return value


def _eval(ast: ExprAst, t: float, lam: float) -> float:
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        return t if ast.name == "t" else lam
    if isinstance(ast, Neg):
        return -_eval(ast.operand, t, lam)
    if isinstance(ast, Binary):
        left = _eval(ast.left, t, lam)
        right = _eval(ast.right, t, lam)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        if right == 0.0:
            raise EvalError("division by zero")
        return left / right
    if isinstance(ast, Power):
        base = _eval(ast.base, t, lam)
        return base ** ast.exponent
    if isinstance(ast, Call):
        try:
            return _CALL_TABLE[ast.func](_eval(ast.arg, t, lam))
        except OverflowError as exc:
            raise EvalError(str(exc)) from exc
    raise TypeError(f"not an expression node: {ast!r}")


# Printing precedence levels; parenthesise a child whenever its level is
# below the context required by its parent.
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def to_string(ast: ExprAst) -> str:
    """Render with minimal parentheses; reparsing gives an identical tree."""
    return _print(ast, 0)


def _print(ast: ExprAst, context: int) -> str:
    if isinstance(ast, Const):
        text = repr(ast.value)
        level = _PREC_ATOM if ast.value >= 0 else _PREC_NEG
    elif isinstance(ast, Var):
        text, level = ast.name, _PREC_ATOM
    elif isinstance(ast, Neg):
        text, level = "-" + _print(ast.operand, _PREC_NEG), _PREC_NEG
    elif isinstance(ast, Binary):
        level = _PREC_ADD if ast.op in "+-" else _PREC_MUL
        text = f"{_print(ast.left, level)} {ast.op} {_print(ast.right, level + 1)}"
    elif isinstance(ast, Power):
        text, level = f"{_print(ast.base, _PREC_ATOM)}^{ast.exponent}", _PREC_POW
    elif isinstance(ast, Call):
        text, level = f"{ast.func}({_print(ast.arg, 0)})", _PREC_ATOM
    else:
        raise TypeError(f"not an expression node: {ast!r}")
    if level < context:
        return f"({text})"
    return text


def _uses_var(ast: ExprAst, name: str) -> bool:
    if isinstance(ast, Var):
        return ast.name == name
    if isinstance(ast, Neg):
        return _uses_var(ast.operand, name)
    if isinstance(ast, Binary):
        return _uses_var(ast.left, name) or _uses_var(ast.right, name)
    if isinstance(ast, Power):
        return _uses_var(ast.base, name)
    if isinstance(ast, Call):
        return _uses_var(ast.arg, name)
    return False


def uses_t(ast: ExprAst) -> bool:
    """True when the tree references the variable ``t`` anywhere."""
    return _uses_var(ast, "t")


def uses_lambda(ast: ExprAst) -> bool:
    """True when the tree references the parameter ``lambda`` anywhere."""
    return _uses_var(ast, "lambda")


@functools.lru_cache(maxsize=4096)
def compile_expr(ast: ExprAst) -> Callable[[object, float], object]:
    """Compile to a closure ``f(t, lam)`` that also accepts numpy arrays.

    The fast path used inside integrators; it performs no division or
    finiteness checks (use :func:`eval_expr` for checked evaluation).
    """
    if isinstance(ast, Const):
        v = ast.value
        return lambda t, lam: v
    if isinstance(ast, Var):
        if ast.name == "t":
            return lambda t, lam: t
        return lambda t, lam: lam
    if isinstance(ast, Neg):
        f = compile_expr(ast.operand)
        return lambda t, lam: -f(t, lam)
    if isinstance(ast, Binary):
        fl = compile_expr(ast.left)
        fr = compile_expr(ast.right)
        if ast.op == "+":
            return lambda t, lam: fl(t, lam) + fr(t, lam)
        if ast.op == "-":
            return lambda t, lam: fl(t, lam) - fr(t, lam)
        if ast.op == "*":
            return lambda t, lam: fl(t, lam) * fr(t, lam)
        return lambda t, lam: fl(t, lam) / fr(t, lam)
    if isinstance(ast, Power):
        f = compile_expr(ast.base)
        e = ast.exponent
        return lambda t, lam: f(t, lam) ** e
    if isinstance(ast, Call):
        f = compile_expr(ast.arg)
        g = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[ast.func]
        return lambda t, lam: g(f(t, lam))
    raise TypeError(f"not an expression node: {ast!r}")
