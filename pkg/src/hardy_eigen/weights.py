"""Weight functions u, v written in a small arithmetic expression language.

Grammar (``^`` is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | base
    base   := number | 'x' | '(' expr ')' | func '(' expr ')'
    func   := exp | log | sin | cos | sqrt | abs
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, NotPositive, WeightSyntaxError
from .function_space import Grid, SampledFunction

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "WeightExpr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "WeightExpr"
    right: "WeightExpr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "WeightExpr"


WeightExpr = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            # skip whitespace to report the offending character itself
            while text[pos].isspace():
                pos += 1
            raise WeightSyntaxError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()), text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str):
        kind, value, offset = self.peek()
        what = "end of input" if kind == "end" else repr(value)
        raise WeightSyntaxError(f"{message}, found {what}", offset, self.text)

    def expect(self, value: str):
        if self.peek()[1] != value or self.peek()[0] != "op":
            self.error(f"expected {value!r}")
        self.take()

    def expr(self) -> WeightExpr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> WeightExpr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> WeightExpr:
        base = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> WeightExpr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.base()

    def base(self) -> WeightExpr:
        kind, value, _ = self.peek()
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            if value == "x":
                self.take()
                return Var()
            if value in FUNCTIONS:
                self.take()
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            self.error("unknown name")
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a number, 'x', a function or '('")


def parse_weight(text: str) -> WeightExpr:
    """Parse ``text`` into an expression tree.

    Raises:
        WeightSyntaxError: with the byte offset of the first offending token.
    """
    if not text or not text.strip():
        raise WeightSyntaxError("empty expression", 0, text)
    parser = _Parser(text)
    tree = parser.expr()
    if parser.peek()[0] != "end":
        parser.error("unexpected trailing input")
    return tree


def unparse(node: WeightExpr) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    return f"({unparse(node.left)}{node.op}{unparse(node.right)})"


def evaluate(node: WeightExpr, x):
    """Evaluate the tree at ``x`` (scalar or array).

    Raises:
        DomainError: log of a non-positive value, sqrt of a negative value,
            division by zero, or any other non-finite intermediate.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(node, x)
    return out


def _eval(node, x):
    if isinstance(node, Num):
        return np.full_like(x, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, Call):
        arg = _eval(node.arg, x)
        if node.func == "log" and np.any(arg <= 0):
            raise DomainError("log of a non-positive value")
        if node.func == "sqrt" and np.any(arg < 0):
            raise DomainError("sqrt of a negative value")
        return _finite(FUNCTIONS[node.func](arg), node.func)
    left = _eval(node.left, x)
    right = _eval(node.right, x)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(right == 0):
            raise DomainError("division by zero")
        return _finite(left / right, "/")
    return _finite(np.power(left, right), "^")


def _finite(values, what):
    if not np.all(np.isfinite(values)):
        raise DomainError(f"non-finite result in {what!r}")
    return values


def evaluate_weight(expr: WeightExpr, grid: Grid) -> SampledFunction:
    """Pointwise evaluation at the nodes of ``grid``."""
    return SampledFunction(grid, np.broadcast_to(evaluate(expr, grid.nodes), (grid.size,)))


@dataclass(frozen=True, eq=False)
class WeightPair:
    u: WeightExpr
    v: WeightExpr
    samples_u: SampledFunction
    samples_v: SampledFunction

    @property
    def grid(self) -> Grid:
        return self.samples_u.grid


def _as_expr(w) -> WeightExpr:
    return parse_weight(w) if isinstance(w, str) else w


def check_positive(expr: WeightExpr, grid: Grid, name: str = "weight") -> None:
    """Require strict positivity at the nodes and at every cell midpoint."""
    x = grid.nodes
    probe = np.concatenate([x, 0.5 * (x[1:] + x[:-1])])
    vals = np.broadcast_to(evaluate(expr, probe), probe.shape)
    bad = np.flatnonzero(vals <= 0)
    if bad.size:
        raise NotPositive(f"{name} = {unparse(expr)} is not positive at x = {probe[bad[0]]:.6g}")


def make_weight_pair(u, v, grid: Grid) -> WeightPair:
    """Parse (if needed), check positivity and sample both weights on ``grid``."""
    u, v = _as_expr(u), _as_expr(v)
    check_positive(u, grid, "u")
    check_positive(v, grid, "v")
    return WeightPair(u, v, evaluate_weight(u, grid), evaluate_weight(v, grid))
