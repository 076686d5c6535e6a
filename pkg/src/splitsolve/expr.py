"""Coefficient expression mini-language.

Grammar (| is alternation, * repetition, ? option):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?          # '^' is right-associative power
    unary  := '-' unary | atom
    atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

Identifiers are the variables t, x, p, q and the functions sin, cos,
exp, log, sqrt, abs, min, max, clamp, erf.  Note that per the grammar a
leading minus binds tighter than '^'; "-x^2" is (-x)^2.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf

from .errors import ArityMismatch, ParseError, UnknownIdentifier

VARIABLES = ("t", "x", "p", "q")

FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "clamp": (3, lambda v, lo, hi: np.minimum(np.maximum(v, lo), hi)),
    "erf": (1, _erf),
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))")


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            off = len(src) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", off,
                             {"number", "identifier", "operator"})
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind == "op" and val == op:
            return self.advance()
        raise ParseError(f"got {val or 'end of input'!r}", off, {repr(op)})

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", off,
                             {"operator", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = Bin(val, node, self.factor())
            else:
                return node

    def factor(self):
        node = self.unary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return Bin("^", node, self.factor())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k, v, _ = self.peek()
                    if k == "op" and v == ",":
                        self.advance()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                arity = FUNCTIONS[val][0]
                if len(args) != arity:
                    raise ArityMismatch(val, arity, len(args), off)
                return Call(val, tuple(args))
            if val in VARIABLES:
                return Var(val)
            raise UnknownIdentifier(val, off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"got {val or 'end of input'!r}", off,
                         {"number", "identifier", "'('", "'-'"})


def parse_expression(src: str):
    """Parse source text into an AST; raises ParseError / ArityMismatch /
    UnknownIdentifier with byte offsets."""
    if not src or not src.strip():
        raise ParseError("empty expression", 0, {"expression"})
    return _Parser(src).parse()


def evaluate(node, env: dict):
    """Evaluate an AST under variable bindings; numpy-broadcasting."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Bin):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            # np.divide keeps evaluation total (inf/nan, never a raise)
            return np.divide(left, right)
        return np.power(left, right)
    return FUNCTIONS[node.name][1](*(evaluate(a, env) for a in node.args))


def free_variables(node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Bin):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= free_variables(a)
        return out
    return frozenset()


def compile_expression(node, variables: tuple[str, ...]):
    """Closure over an AST taking the named variables positionally."""

    def fn(*args):
        return evaluate(node, dict(zip(variables, args)))

    return fn


_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_LEVEL = 5  # a leading minus binds tighter than '^' in this grammar


def _pp(node, parent_level: int) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        inner = ", ".join(_pp(a, 0) for a in node.args)
        return f"{node.name}({inner})"
    if isinstance(node, Neg):
        text = f"-{_pp(node.operand, _UNARY_LEVEL)}"
        return f"({text})" if parent_level >= _UNARY_LEVEL else text
    level = _LEVEL[node.op]
    if node.op == "^":
        # the base must reparse as a unary, the exponent chains rightward
        text = f"{_pp(node.left, _UNARY_LEVEL)}^{_pp(node.right, level - 1)}"
    else:
        text = f"{_pp(node.left, level - 1)} {node.op} {_pp(node.right, level)}"
    return f"({text})" if parent_level >= level else text


def pretty(node) -> str:
    """Canonical text form; parse(pretty(ast)) reproduces the AST."""
    return _pp(node, 0)
