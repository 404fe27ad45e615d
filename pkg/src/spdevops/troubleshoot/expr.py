"""A small, safe expression language for decision nodes.

Grammar (lowest to highest precedence)::

    expr    := or
    or      := and ("or" and)*
    and     := not ("and" not)*
    not     := "not" not | cmp
    cmp     := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
    sum     := prod (("+" | "-") prod)*
    prod    := unary (("*" | "/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | STRING | "true" | "false" | NAME | NAME "(" args ")"
             | "[" args "]" | "(" expr ")"

Names may contain dots (``count_before.count``). Functions: min, max,
mean, stdev (population), sum, len, abs.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass
from typing import Any, Mapping, Sequence


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, pos: int = 0):
        super().__init__(f"{message} (at column {pos + 1})")
        self.pos = pos


class ExprTypeError(TypeError):
    pass


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)
      | (?P<str>"[^"]*"|'[^']*')
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
      | (?P<op><=|>=|==|!=|[-+*/<>(),\[\]])
    )""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(src: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos:].lstrip()[:1]!r}", pos)
        kind = m.lastgroup
        out.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(Token("end", "", len(src)))
    return out


# AST nodes are plain tuples: ("num", v) ("str", s) ("bool", b) ("name", n)
# ("call", f, [args]) ("list", [items]) ("un", op, x) ("bin", op, a, b)

_KEYWORDS = {"and", "or", "not", "true", "false"}


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def take(self, text: str | None = None, kind: str | None = None) -> Token:
        t = self.peek()
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = text or kind
            raise ExprSyntaxError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.pos)
        self.i += 1
        return t

    def accept(self, *texts: str) -> Token | None:
        t = self.peek()
        if t.text in texts and t.kind in ("op", "name"):
            self.i += 1
            return t
        return None

    def parse(self):
        node = self.expr()
        if self.peek().kind != "end":
            t = self.peek()
            raise ExprSyntaxError(f"unexpected {t.text!r}", t.pos)
        return node

    def expr(self):
        node = self.and_()
        while self.accept("or"):
            node = ("bin", "or", node, self.and_())
        return node

    def and_(self):
        node = self.not_()
        while self.accept("and"):
            node = ("bin", "and", node, self.not_())
        return node

    def not_(self):
        if self.accept("not"):
            return ("un", "not", self.not_())
        return self.cmp()

    def cmp(self):
        node = self.sum()
        t = self.accept("<", "<=", ">", ">=", "==", "!=")
        if t:
            node = ("bin", t.text, node, self.sum())
        return node

    def sum(self):
        node = self.prod()
        while True:
            t = self.accept("+", "-")
            if not t:
                return node
            node = ("bin", t.text, node, self.prod())

    def prod(self):
        node = self.unary()
        while True:
            t = self.accept("*", "/")
            if not t:
                return node
            node = ("bin", t.text, node, self.unary())

    def unary(self):
        if self.accept("-"):
            return ("un", "-", self.unary())
        return self.atom()

    def atom(self):
        t = self.peek()
        if t.kind == "num":
            self.i += 1
            return ("num", float(t.text))
        if t.kind == "str":
            self.i += 1
            return ("str", t.text[1:-1])
        if t.kind == "name":
            self.i += 1
            if t.text in ("true", "false"):
                return ("bool", t.text == "true")
            if t.text in _KEYWORDS:
                raise ExprSyntaxError(f"unexpected keyword {t.text!r}", t.pos)
            if self.accept("("):
                return ("call", t.text, self.args(")"), t.pos)
            return ("name", t.text, t.pos)
        if self.accept("["):
            return ("list", self.args("]"))
        if self.accept("("):
            node = self.expr()
            self.take(")")
            return node
        raise ExprSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.pos)

    def args(self, close: str) -> list:
        items = []
        if self.accept(close):
            return items
        while True:
            items.append(self.expr())
            if self.accept(close):
                return items
            self.take(",")


def parse_expr(src: str):
    return _Parser(src).parse()


def referenced_names(node) -> set[str]:
    kind = node[0]
    if kind == "name":
        return {node[1]}
    if kind == "call":
        return set().union(*(referenced_names(a) for a in node[2])) if node[2] else set()
    if kind == "list":
        return set().union(*(referenced_names(a) for a in node[1])) if node[1] else set()
    if kind == "un":
        return referenced_names(node[2])
    if kind == "bin":
        return referenced_names(node[2]) | referenced_names(node[3])
    return set()


def _numbers(values, fname: str) -> list[float]:
    if not isinstance(values, (list, tuple)):
        values = [values]
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ExprTypeError(f"{fname}() needs numbers, got {v!r}")
        out.append(float(v))
    if not out:
        raise ExprTypeError(f"{fname}() of an empty list")
    return out


def _flatten_args(args: list, fname: str) -> list[float]:
    if len(args) == 1:
        return _numbers(args[0], fname)
    return _numbers(list(args), fname)


FUNCTIONS = {
    "min": lambda a: min(_flatten_args(a, "min")),
    "max": lambda a: max(_flatten_args(a, "max")),
    "sum": lambda a: math.fsum(_flatten_args(a, "sum")),
    "mean": lambda a: statistics.fmean(_flatten_args(a, "mean")),
    "stdev": lambda a: statistics.pstdev(_flatten_args(a, "stdev")),
    "len": lambda a: float(len(a[0])) if len(a) == 1 and isinstance(a[0], (list, tuple)) else float(len(a)),
    "abs": lambda a: _abs(a),
}


def _abs(args: list) -> float:
    if len(args) != 1 or isinstance(args[0], (list, tuple)):
        raise ExprTypeError("abs() takes exactly one number")
    return abs(_num(args[0], "abs"))


def _num(v, op: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ExprTypeError(f"operator {op!r} needs numbers, got {v!r}")
    return float(v)


def _eval(node, env: Mapping[str, Any]):
    kind = node[0]
    if kind in ("num", "str", "bool"):
        return node[1]
    if kind == "name":
        if node[1] not in env:
            raise ExprTypeError(f"unknown variable {node[1]!r}")
        return env[node[1]]
    if kind == "list":
        return [_eval(x, env) for x in node[1]]
    if kind == "call":
        fn = FUNCTIONS.get(node[1])
        if fn is None:
            raise ExprTypeError(f"unknown function {node[1]!r}")
        return fn([_eval(x, env) for x in node[2]])
    if kind == "un":
        v = _eval(node[2], env)
        if node[1] == "not":
            return not _truth(v)
        return -_num(v, "-")
    op, a = node[1], node[2]
    if op == "and":
        return _truth(_eval(a, env)) and _truth(_eval(node[3], env))
    if op == "or":
        return _truth(_eval(a, env)) or _truth(_eval(node[3], env))
    x, y = _eval(a, env), _eval(node[3], env)
    if op in ("==", "!="):
        return (x == y) if op == "==" else (x != y)
    x, y = _num(x, op), _num(y, op)
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        if y == 0:
            raise ExprTypeError("division by zero")
        return x / y
    return {"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[op]


def _truth(v) -> bool:
    if isinstance(v, bool):
        return v
    raise ExprTypeError(f"expected a boolean, got {v!r}")


def evaluate(expr, bindings: Mapping[str, Any]):
    node = parse_expr(expr) if isinstance(expr, str) else expr
    return _eval(node, bindings)


def decision_eval(expr, bindings: Mapping[str, Any], branches: Mapping | None = None) -> str:
    """Pick a branch label.

    ``expr`` is either one boolean expression with ``branches`` mapping
    true/false to labels, or an ordered sequence of (label, expression)
    pairs tried if/elif style; the first true guard wins.
    """
    if isinstance(expr, str):
        if branches is None:
            raise ValueError("a single expression needs a true/false branch mapping")
        value = _truth(evaluate(expr, bindings))
        for key, label in branches.items():
            if key is value or (isinstance(key, str) and key.lower() == str(value).lower()):
                return label
        raise ExprTypeError(f"no branch labelled {value}")
    for label, guard in expr:
        if _truth(evaluate(guard, bindings)):
            return label
    raise ExprTypeError("no branch guard is true")


def check_guards(guards: Sequence[tuple[str, Any]]) -> None:
    """Parse-time sanity: every guard is a syntactically valid expression."""
    for _, g in guards:
        if isinstance(g, str):
            parse_expr(g)
