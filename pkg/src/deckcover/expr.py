"""Arithmetic expressions over named coordinates.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Functions: sin, cos, exp. Constant: pi. Syntax errors carry the byte offset
of the offending token; unknown identifiers are reported when an expression
is bound to a list of variable names.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi}


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownIdentifierError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Div:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: object


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str):
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ExpressionSyntaxError(f"unexpected character {text[i]!r}",
                                        len(text[:i].encode()))
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), len(text[:i].encode())))
        i = m.end()
    out.append(("end", "", len(text.encode())))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ExpressionSyntaxError(f"expected {value!r}, found {t[1] or 'end'!r}", t[2])

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.factor())
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            return Pow(b, self.factor())
        return b

    def base(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, (arg,))
            return Var(val)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(f"unexpected {val or 'end of input'!r}", off)


def parse(text: str):
    p = _Parser(text)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"unexpected {val!r}", off)
    return node


# printing

def _level(node) -> int:
    if isinstance(node, (Add, Sub)):
        return 1
    if isinstance(node, (Mul, Div)):
        return 2
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _wrap(node, min_level: int) -> str:
    s = to_text(node)
    return s if _level(node) >= min_level else f"({s})"


def to_text(node) -> str:
    """Text that parses back to the same tree."""
    if isinstance(node, Num):
        if node.value < 0 or math.copysign(1.0, node.value) < 0:
            return f"({repr(node.value)})"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.args[0])})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, 3)
    if isinstance(node, Pow):
        return _wrap(node.base, 5) + "^" + _wrap(node.exp, 3)
    ops = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
    op = ops[type(node)]
    lo = 1 if isinstance(node, (Add, Sub)) else 2
    return f"{_wrap(node.left, lo)}{op}{_wrap(node.right, lo + 1)}"


def identifiers(node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Call):
        return identifiers(node.args[0])
    if isinstance(node, Neg):
        return identifiers(node.arg)
    if isinstance(node, Pow):
        return identifiers(node.base) | identifiers(node.exp)
    return identifiers(node.left) | identifiers(node.right)


def _check_names(node, variables):
    if isinstance(node, Var):
        if node.name not in variables and node.name not in CONSTANTS:
            raise UnknownIdentifierError(f"unknown identifier {node.name!r}")
    elif isinstance(node, Call):
        if node.fn not in FUNCTIONS:
            raise UnknownIdentifierError(f"unknown function {node.fn!r}")
        _check_names(node.args[0], variables)
    elif isinstance(node, Neg):
        _check_names(node.arg, variables)
    elif isinstance(node, Pow):
        _check_names(node.base, variables)
        _check_names(node.exp, variables)
    elif not isinstance(node, Num):
        _check_names(node.left, variables)
        _check_names(node.right, variables)


def evaluate(node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name] if node.name in env else CONSTANTS[node.name]
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](evaluate(node.args[0], env))
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Pow):
        return evaluate(node.base, env) ** evaluate(node.exp, env)
    a, b = evaluate(node.left, env), evaluate(node.right, env)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    return a / b


def _num(v):
    return Num(v) if v >= 0 else Neg(Num(-v))


def _is(node, v):
    return isinstance(node, Num) and node.value == v


def diff(node, var: str):
    """Symbolic derivative with light constant folding."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        d = diff(node.arg, var)
        return Num(0.0) if _is(d, 0.0) else Neg(d)
    if isinstance(node, (Add, Sub)):
        a, b = diff(node.left, var), diff(node.right, var)
        if _is(b, 0.0):
            return a
        if _is(a, 0.0):
            return b if isinstance(node, Add) else Neg(b)
        return type(node)(a, b)
    if isinstance(node, Mul):
        a, b = diff(node.left, var), diff(node.right, var)
        return _sum(_prod(a, node.right), _prod(node.left, b))
    if isinstance(node, Div):
        a, b = diff(node.left, var), diff(node.right, var)
        num = _diff_terms(_prod(a, node.right), _prod(node.left, b))
        if _is(num, 0.0):
            return Num(0.0)
        return Div(num, Pow(node.right, Num(2.0)))
    if isinstance(node, Call):
        u = node.args[0]
        du = diff(u, var)
        if node.fn == "sin":
            outer = Call("cos", (u,))
        elif node.fn == "cos":
            outer = Neg(Call("sin", (u,)))
        else:
            outer = node
        return _prod(outer, du)
    if isinstance(node, Pow):
        if var not in identifiers(node.exp):
            db = diff(node.base, var)
            if _is(db, 0.0):
                return Num(0.0)
            n = node.exp
            lower = Sub(n, Num(1.0)) if not isinstance(n, Num) else _num(n.value - 1.0)
            return _prod(_prod(n, Pow(node.base, lower)), db)
        # general case: d(b^e) = b^e (e' log b + e b'/b); log is not in the language
        raise ValueError("derivative of a variable exponent is not supported")
    raise TypeError(node)


def _prod(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return Num(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Mul(a, b)


def _sum(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Add(a, b)


def _diff_terms(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return Neg(b)
    return Sub(a, b)


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to an ordered list of variable names."""
    text: str
    tree: object
    variables: tuple

    @staticmethod
    def bind(text: str | float | int, variables: Sequence[str]) -> "Expression":
        tree = parse(str(text)) if isinstance(text, str) else _num(float(text))
        _check_names(tree, set(variables))
        return Expression(str(text), tree, tuple(variables))

    def __call__(self, *args):
        env = dict(zip(self.variables, args))
        out = evaluate(self.tree, env)
        if args and isinstance(args[0], np.ndarray):
            return np.broadcast_to(np.asarray(out, dtype=float), np.shape(args[0])).copy()
        return float(out)

    def at(self, y) -> float:
        return self(*[float(v) for v in np.atleast_1d(y)])

    def derivative(self, var: str) -> "Expression":
        t = diff(self.tree, var)
        return Expression(to_text(t), t, self.variables)

    def gradient(self) -> list["Expression"]:
        return [self.derivative(v) for v in self.variables]


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    return Expression.bind(text, variables)
