"""Troubleshooting graphs: text format, data model and structural checks.

One statement per line::

    node <id> = tool <name>(<args>)
    node <id> = decision {<label>: <expr>, ...}
    node <id> = sink "<verdict>"
    edge <from>[:<label>] -> <to>
    entry <id>

``#`` starts a comment. Decision guards are tried in the order written and
the first true one selects its label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ExprSyntaxError, parse_expr


class TsgError(ValueError):
    pass


class ParseError(TsgError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CycleError(TsgError):
    pass


class UnlabeledBranchError(TsgError):
    pass


@dataclass(frozen=True)
class ToolNode:
    id: str
    name: str
    args: dict
    positional: tuple = ()


@dataclass(frozen=True)
class DecisionNode:
    id: str
    guards: tuple[tuple[str, str], ...]  # (label, expression source)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.guards)


@dataclass(frozen=True)
class SinkNode:
    id: str
    verdict: str


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: str | None = None


@dataclass
class Tsg:
    nodes: dict[str, ToolNode | DecisionNode | SinkNode]
    edges: list[Edge]
    entry: str
    order: list[str] = field(default_factory=list)  # a topological order

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == node_id]


_ID = r"[A-Za-z_][A-Za-z0-9_]*"
_NODE = re.compile(rf"^node\s+({_ID})\s*=\s*(tool|decision|sink)\b\s*(.*)$")
_EDGE = re.compile(rf'^edge\s+({_ID})(?:\s*:\s*("[^"]*"|{_ID}))?\s*->\s*({_ID})$')
_ENTRY = re.compile(rf"^entry\s+({_ID})$")
_TOOL = re.compile(rf"^({_ID})\s*\((.*)\)$")
_SINK = re.compile(r'^"([^"]*)"$')


def _split_top(text: str, sep: str) -> list[str]:
    """Split on ``sep`` outside quotes and brackets."""
    parts, depth, quote, cur = [], 0, None, []
    for ch in text:
        if quote:
            cur.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        cur.append(ch)
    if quote or depth:
        raise ValueError("unbalanced quotes or brackets")
    parts.append("".join(cur))
    return parts


def _literal(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def _unquote(label: str) -> str:
    label = label.strip()
    if len(label) >= 2 and label[0] == label[-1] == '"':
        return label[1:-1]
    return label


def _parse_tool(node_id: str, body: str, line: int) -> ToolNode:
    m = _TOOL.match(body)
    if not m:
        raise ParseError(f"expected tool <name>(<args>), got {body!r}", line)
    args, positional = {}, []
    inner = m.group(2).strip()
    if inner:
        try:
            items = _split_top(inner, ",")
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        for item in items:
            if not item.strip():
                raise ParseError("empty tool argument", line)
            key, eq, value = item.partition("=")
            if eq and re.fullmatch(_ID, key.strip()):
                args[key.strip()] = _literal(value)
            elif args:
                raise ParseError("positional argument after keyword argument", line)
            else:
                positional.append(_literal(item))
    return ToolNode(node_id, m.group(1), args, tuple(positional))


def _parse_decision(node_id: str, body: str, line: int) -> DecisionNode:
    body = body.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ParseError("decision needs {label: expr, ...}", line)
    guards = []
    try:
        items = _split_top(body[1:-1], ",")
    except ValueError as exc:
        raise ParseError(str(exc), line) from None
    for item in items:
        if not item.strip():
            continue
        try:
            label, colon, guard = (s for s in _split_label(item))
        except ValueError:
            raise ParseError(f"decision branch {item.strip()!r} needs 'label: expr'", line) from None
        label = _unquote(label)
        if not label:
            raise UnlabeledBranchError(f"line {line}: empty branch label in {node_id}")
        try:
            parse_expr(guard)
        except ExprSyntaxError as exc:
            raise ParseError(f"branch {label!r}: {exc}", line) from None
        guards.append((label, guard.strip()))
    if not guards:
        raise ParseError("decision without branches", line)
    labels = [g[0] for g in guards]
    if len(set(labels)) != len(labels):
        raise UnlabeledBranchError(f"line {line}: duplicate branch label in {node_id}")
    return DecisionNode(node_id, tuple(guards))


def _split_label(item: str):
    parts = _split_top(item, ":")
    if len(parts) < 2:
        raise ValueError
    return parts[0], ":", ":".join(parts[1:])


def parse_tsg(text: str) -> Tsg:
    nodes: dict = {}
    edges: list[Edge] = []
    edge_lines: list[int] = []
    entry = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if m := _NODE.match(line):
            node_id, kind, body = m.groups()
            if node_id in nodes:
                raise ParseError(f"node {node_id!r} defined twice", lineno)
            if kind == "tool":
                nodes[node_id] = _parse_tool(node_id, body.strip(), lineno)
            elif kind == "decision":
                nodes[node_id] = _parse_decision(node_id, body, lineno)
            else:
                sm = _SINK.match(body.strip())
                if not sm:
                    raise ParseError('sink needs a quoted verdict: sink "<verdict>"', lineno)
                nodes[node_id] = SinkNode(node_id, sm.group(1))
        elif m := _EDGE.match(line):
            src, label, dst = m.groups()
            edges.append(Edge(src, dst, None if label is None else _unquote(label)))
            edge_lines.append(lineno)
        elif m := _ENTRY.match(line):
            entry = m.group(1)
        else:
            raise ParseError(f"cannot parse {line!r}", lineno)
    for e, lineno in zip(edges, edge_lines):
        for end in (e.src, e.dst):
            if end not in nodes:
                raise ParseError(f"edge refers to unknown node {end!r}", lineno)
        if isinstance(nodes[e.src], SinkNode):
            raise ParseError(f"sink {e.src!r} cannot have outgoing edges", lineno)
    if not nodes:
        raise ParseError("empty troubleshooting graph", 1)
    if entry is None:
        roots = [n for n in nodes if not any(e.dst == n for e in edges)]
        if len(roots) != 1:
            raise ParseError(f"cannot infer entry node (roots: {roots}); add 'entry <id>'", 1)
        entry = roots[0]
    elif entry not in nodes:
        raise ParseError(f"unknown entry node {entry!r}", 1)
    t = Tsg(nodes, edges, entry)
    check_tsg(t)
    return t


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def check_tsg(t: Tsg) -> None:
    """Acyclicity, branch labelling and sink reachability; fills ``t.order``."""
    indeg = {n: 0 for n in t.nodes}
    for e in t.edges:
        indeg[e.dst] += 1
    ready = [n for n in t.nodes if indeg[n] == 0]
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for e in t.out_edges(n):
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
    if len(order) != len(t.nodes):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleError(f"troubleshooting graph has a cycle through {', '.join(stuck)}")
    t.order = order

    for node in t.nodes.values():
        outs = t.out_edges(node.id)
        if isinstance(node, DecisionNode):
            seen = set()
            for e in outs:
                if e.label is None:
                    raise UnlabeledBranchError(f"edge {e.src} -> {e.dst} leaves a decision without a label")
                if e.label not in node.labels:
                    raise UnlabeledBranchError(f"{node.id} has no branch {e.label!r}")
                if e.label in seen:
                    raise UnlabeledBranchError(f"{node.id} branch {e.label!r} used twice")
                seen.add(e.label)
            missing = [l for l in node.labels if l not in seen]
            if missing:
                raise UnlabeledBranchError(f"{node.id} branches without edges: {missing}")
        elif isinstance(node, ToolNode):
            if not outs:
                raise TsgError(f"tool node {node.id} leads nowhere; every path must end at a sink")
            for e in outs:
                if e.label is not None:
                    raise UnlabeledBranchError(f"tool node {node.id} cannot have labelled edge {e.label!r}")

    reachable = {t.entry}
    for n in t.order:
        if n in reachable:
            reachable.update(e.dst for e in t.out_edges(n))
    unreachable = sorted(set(t.nodes) - reachable)
    if unreachable:
        raise TsgError(f"nodes unreachable from entry: {', '.join(unreachable)}")


def load_tsg(path: str | Path) -> Tsg:
    return parse_tsg(Path(path).read_text(encoding="utf-8"))


ELASTIC_FIREWALL_PATH = Path(__file__).with_name("data") / "elastic_firewall.tsg"


def elastic_firewall_tsg() -> Tsg:
    return load_tsg(ELASTIC_FIREWALL_PATH)
