"""Complex-valued expressions over real coordinate variables.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := atom ("^" integer)? | "-" factor
    atom   := number | "i" | ident | ident "(" expr ")" | "(" expr ")"

``i`` is the imaginary unit. Exponents are integers (an optional sign is
accepted). Functions: sin, cos, sinh, cosh, tanh, exp, sqrt.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "sqrt": np.sqrt,
}

TINY = 1e-300


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class ExprEvalError(ValueError):
    pass


class UnboundVariableError(ExprEvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Imag:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Imag, Var, Neg, BinOp, Pow, Call]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos), src)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(src, len(src))))
    return tokens


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"expected {expected}, found {found}", t.offset, self.src)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(repr(text))

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.error("operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        if self.accept("-"):
            return Neg(self.factor())
        base = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            t = self.tok
            if t.kind != "number" or not t.text.isdigit():
                self.error("integer exponent")
            self.pos += 1
            return Pow(base, sign * int(t.text))
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.pos += 1
            return Num(float(t.text))
        if t.kind == "ident":
            self.pos += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {t.text!r}", t.offset, self.src)
                self.pos += 1
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text == "i":
                return Imag()
            if t.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {t.text!r} needs an argument", self.tok.offset, self.src)
            return Var(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("number, variable, function call or '('")


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        With the byte offset of the offending token.
    """
    return _Parser(src).parse()


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Imag)):
        return set()
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, Call):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def eval_expr(e: Expr, bindings: Mapping[str, float]):
    """Evaluate to a complex value (or complex array for array bindings)."""
    with np.errstate(all="ignore"):
        return _eval(e, bindings)


def _eval(e: Expr, b: Mapping[str, float]):
    if isinstance(e, Num):
        return complex(e.value)
    if isinstance(e, Imag):
        return 1j
    if isinstance(e, Var):
        try:
            return b[e.name] + 0j
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Pow):
        base = _eval(e.base, b)
        if e.exponent < 0:
            _check_divisor(base)
            return (1.0 / base) ** (-e.exponent)
        return base ** e.exponent
    if isinstance(e, Call):
        return FUNCTIONS[e.fn](_eval(e.arg, b))
    left = _eval(e.left, b)
    right = _eval(e.right, b)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    _check_divisor(right)
    return left / right


def _check_divisor(x):
    if np.any(np.abs(x) < TINY):
        raise ExprEvalError("division by zero")


def compile_expr(e: Expr):
    """Return ``f(bindings) -> complex``; constant subtrees are folded once."""
    if not free_variables(e):
        value = eval_expr(e, {})
        return lambda bindings: value
    return lambda bindings: eval_expr(e, bindings)


# precedence: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom
def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 if e.op in "+-" else 2
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_source(e: Expr) -> str:
    """Canonical source text; ``parse_expr(to_source(e)) == e``."""
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Imag):
        return "i"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        return f"-{inner}" if _prec(e.arg) >= 3 else f"-({inner})"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    p = _prec(e)
    left = to_source(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_source(e.right)
    # unary minus is a factor, so it may stand unparenthesized on the right
    if _prec(e.right) <= p and not isinstance(e.right, Neg):
        right = f"({right})"
    return f"{left} {e.op} {right}"


__all__ = [
    "Expr", "Num", "Imag", "Var", "Neg", "BinOp", "Pow", "Call",
    "ExprSyntaxError", "ExprEvalError", "UnboundVariableError",
    "parse_expr", "eval_expr", "compile_expr", "free_variables", "to_source",
]

