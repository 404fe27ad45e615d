"""Network-function forwarding graphs: data model, validation, chain extraction, updates."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable

from .packets import EMPTY, INT_FIELDS, ENUM_DOMAINS, PacketClass, PacketSet, pc_intersect, pc_subtract
from .vnf import (
    EndpointConfig,
    LoadBalancerConfig,
    VnfConfig,
    VnfKind,
    config_from_json,
    config_to_json,
    transfer,
)


class NffgError(Exception):
    pass


class CyclicRouteError(NffgError):
    pass


class RejectedUpdate(NffgError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        self.violation = violations[0]
        super().__init__(str(self.violation))


@dataclass(frozen=True)
class VnfInstance:
    id: str
    kind: VnfKind
    config: VnfConfig = field(default_factory=EndpointConfig)
    ports: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", VnfKind(self.kind))
        object.__setattr__(self, "ports", tuple(self.ports))


@dataclass(frozen=True)
class Link:
    src_node: str
    src_port: str
    dst_node: str
    dst_port: str

    def __str__(self):
        return f"{self.src_node}:{self.src_port}->{self.dst_node}:{self.dst_port}"


@dataclass(frozen=True)
class Endpoint:
    id: str
    role: str  # client | server


@dataclass(frozen=True)
class Rule:
    node: str
    priority: int
    match: PacketClass
    out_port: str


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.kind} [{self.subject}]: {self.message}"


@dataclass(frozen=True)
class NFFG:
    nodes: tuple[VnfInstance, ...] = ()
    links: tuple[Link, ...] = ()
    endpoints: tuple[Endpoint, ...] = ()
    rules: tuple[Rule, ...] = ()
    version: int = 0

    def __post_init__(self):
        for name in ("nodes", "links", "endpoints", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @cached_property
    def _node_index(self) -> dict[str, VnfInstance]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _out_links(self) -> dict[tuple[str, str], Link]:
        return {(l.src_node, l.src_port): l for l in self.links}

    @cached_property
    def _rule_index(self) -> dict[str, tuple[Rule, ...]]:
        by_node: dict[str, list[tuple[int, int, Rule]]] = {}
        for i, r in enumerate(self.rules):
            by_node.setdefault(r.node, []).append((-r.priority, i, r))
        return {k: tuple(r for _, _, r in sorted(v)) for k, v in by_node.items()}

    def node(self, node_id: str) -> VnfInstance:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise KeyError(f"unknown node {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    def link_from(self, node_id: str, port: str) -> Link | None:
        return self._out_links.get((node_id, port))

    def port_towards(self, node_id: str, neighbor: str) -> str | None:
        for l in self.links:
            if l.src_node == node_id and l.dst_node == neighbor:
                return l.src_port
        return None

    def rules_for(self, node_id: str) -> tuple[Rule, ...]:
        """Rules of a node in match order (higher priority first, then file order)."""
        return self._rule_index.get(node_id, ())

    def role(self, node_id: str) -> str | None:
        for e in self.endpoints:
            if e.id == node_id:
                return e.role
        return None

    @property
    def clients(self) -> list[str]:
        return [e.id for e in self.endpoints if e.role == "client"]

    @property
    def servers(self) -> list[str]:
        return [e.id for e in self.endpoints if e.role == "server"]

    def nodes_of(self, kind: VnfKind | str) -> list[VnfInstance]:
        kind = VnfKind(kind)
        return [n for n in self.nodes if n.kind is kind]

    def rename(self, mapping: dict[str, str]) -> NFFG:
        """Copy with node ids renamed; ports and configs are kept."""
        m = lambda x: mapping.get(x, x)  # noqa: E731
        nodes = []
        for n in self.nodes:
            cfg = n.config
            if isinstance(cfg, LoadBalancerConfig):
                cfg = replace(cfg, backends=tuple(m(b) for b in cfg.backends))
            nodes.append(replace(n, id=m(n.id), config=cfg))
        return NFFG(
            tuple(nodes),
            tuple(Link(m(l.src_node), l.src_port, m(l.dst_node), l.dst_port) for l in self.links),
            tuple(Endpoint(m(e.id), e.role) for e in self.endpoints),
            tuple(replace(r, node=m(r.node)) for r in self.rules),
            self.version,
        )


# --- validation ---------------------------------------------------------------


def validate(g: NFFG) -> list[Violation]:
    out: list[Violation] = []
    seen: set[str] = set()
    for n in g.nodes:
        if n.id in seen:
            out.append(Violation("duplicate-node", n.id, "node id used more than once"))
        seen.add(n.id)
        if len(set(n.ports)) != len(n.ports):
            out.append(Violation("duplicate-port", n.id, "port listed more than once"))
        if getattr(n.config, "kind", n.kind) is not n.kind:
            out.append(Violation("config-kind", n.id, f"{n.kind.value} node carries {n.config.kind.value} config"))

    index = g._node_index
    for e in g.endpoints:
        node = index.get(e.id)
        if node is None:
            out.append(Violation("endpoint", e.id, "endpoint refers to a missing node"))
        elif node.kind is not VnfKind.ENDPOINT:
            out.append(Violation("endpoint", e.id, f"endpoint node has kind {node.kind.value}"))
        if e.role not in ("client", "server"):
            out.append(Violation("endpoint", e.id, f"unknown role {e.role!r}"))

    used_ports: set[tuple[str, str]] = set()
    for l in g.links:
        for nid, port in ((l.src_node, l.src_port), (l.dst_node, l.dst_port)):
            node = index.get(nid)
            if node is None:
                out.append(Violation("dangling-link", str(l), f"node {nid!r} does not exist"))
            elif port not in node.ports:
                out.append(Violation("dangling-link", str(l), f"port {nid}:{port} does not exist"))
        key = (l.src_node, l.src_port)
        if key in used_ports:
            out.append(Violation("duplicate-link", str(l), "port already has an outgoing link"))
        used_ports.add(key)

    for r in g.rules:
        node = index.get(r.node)
        subject = f"rule@{r.node}[prio={r.priority},out={r.out_port}]"
        if node is None:
            out.append(Violation("rule", subject, "rule installed on a missing node"))
        elif r.out_port not in node.ports:
            out.append(Violation("rule", subject, f"out_port {r.out_port!r} is not a port of {r.node}"))

    for n in g.nodes:
        if isinstance(n.config, LoadBalancerConfig):
            for b in n.config.backends:
                if b not in index:
                    out.append(Violation("lb-backend", n.id, f"backend {b!r} does not exist"))

    adj: dict[str, set[str]] = {}
    for l in g.links:
        if l.src_node in index and l.dst_node in index:
            adj.setdefault(l.src_node, set()).add(l.dst_node)
    servers = set(g.servers)
    for c in g.clients:
        if c not in index:
            continue
        seen_nodes = {c}
        queue = deque([c])
        reached = False
        while queue and not reached:
            cur = queue.popleft()
            for nxt in sorted(adj.get(cur, ())):
                if nxt in servers:
                    reached = True
                    break
                if nxt not in seen_nodes:
                    seen_nodes.add(nxt)
                    queue.append(nxt)
        if not reached:
            out.append(Violation("connectivity", c, "client endpoint reaches no server endpoint"))
    return out


# --- symbolic traversal helpers -----------------------------------------------


def refine_origin(origin: PacketClass, source: PacketClass, rewritten: frozenset) -> PacketClass:
    """Restrict ``origin`` by the fields of ``source`` that still carry original values."""
    if source.is_empty():
        return EMPTY
    changes = {f: source.get(f) for f in INT_FIELDS + tuple(ENUM_DOMAINS) if f not in rewritten}
    return pc_intersect(origin, origin.with_(**changes))


def route(g: NFFG, node_id: str, klass: PacketClass) -> list[tuple[PacketClass, str]]:
    """First-match split of ``klass`` over the node's forwarding rules: (sub-class, out_port)."""
    out = []
    remaining = [klass]
    for rule in g.rules_for(node_id):
        nxt = []
        for piece in remaining:
            hit = pc_intersect(piece, rule.match)
            if hit:
                out.append((hit, rule.out_port))
                nxt.extend(pc_subtract(piece, rule.match))
            else:
                nxt.append(piece)
        remaining = nxt
        if not remaining:
            break
    return out


@dataclass(frozen=True)
class Chain:
    client: str
    server: str
    nodes: tuple[VnfInstance, ...]
    traffic: PacketSet

    @property
    def path(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def middle(self) -> tuple[VnfInstance, ...]:
        return self.nodes[1:-1]

    @property
    def traffic_class(self) -> PacketSet:
        return self.traffic

    def __str__(self):
        return " -> ".join(self.path)


@dataclass
class _Walk:
    node: str
    origin: PacketClass
    current: PacketClass
    rewritten: frozenset
    path: tuple[str, ...]


def extract_chains(g: NFFG) -> list[Chain]:
    """Decompose the graph into (client, server, VNF path) chains with their traffic.

    Traversal follows forwarding rules and load-balancer buckets and applies
    header rewrites, but ignores drops: a chain records where traffic is
    steered, not whether it survives.
    """
    found: dict[tuple[str, str, tuple[str, ...]], list[PacketClass]] = {}
    for client in g.clients:
        for klass, port in route(g, client, PacketClass()):
            _follow(g, _Walk(client, klass, klass, frozenset(), (client,)), port, found)
    chains = []
    for (client, server, path), origins in found.items():
        chains.append(Chain(client, server, tuple(g.node(n) for n in path), PacketSet(origins)))
    return chains


def _follow(g: NFFG, walk: _Walk, port: str, found: dict) -> None:
    todo = deque([(walk, port)])
    while todo:
        w, out_port = todo.popleft()
        link = g.link_from(w.node, out_port)
        if link is None:
            continue
        nxt = link.dst_node
        if nxt in w.path:
            raise CyclicRouteError(f"route revisits {nxt} via {' -> '.join(w.path)}")
        path = w.path + (nxt,)
        node = g.node(nxt)
        if node.kind is VnfKind.ENDPOINT:
            if g.role(nxt) == "server":
                found.setdefault((path[0], nxt, path), []).append(w.origin)
            continue
        result = transfer(node.config, w.current)
        seen = set()
        for o in result.outcomes:
            key = (o.source, o.klass)
            if key in seen:
                continue
            seen.add(key)
            origin = refine_origin(w.origin, o.source, w.rewritten)
            rewritten = w.rewritten | o.rewrites
            if o.disposition.next_hop is not None:
                p = g.port_towards(nxt, o.disposition.next_hop)
                if p is not None:
                    todo.append((_Walk(nxt, origin, o.klass, rewritten, path), p))
                continue
            if o.disposition.out_port is not None:
                todo.append((_Walk(nxt, origin, o.klass, rewritten, path), o.disposition.out_port))
                continue
            for sub, p in route(g, nxt, o.klass):
                sub_origin = refine_origin(origin, sub, rewritten)
                todo.append((_Walk(nxt, sub_origin, sub, rewritten, path), p))


def admitted_traffic(g: NFFG, client: str | None = None) -> PacketSet:
    """Union of the classes a client's rules emit (all clients when ``client`` is None)."""
    out = PacketSet()
    for c in g.clients if client is None else [client]:
        out = out.union(PacketSet(k for k, _ in route(g, c, PacketClass())))
    return out


# --- updates --------------------------------------------------------------------


class UpdateOp(str, Enum):
    ADD_NODE = "ADD_NODE"
    REMOVE_NODE = "REMOVE_NODE"
    ADD_LINK = "ADD_LINK"
    REMOVE_LINK = "REMOVE_LINK"
    SET_RULES = "SET_RULES"


@dataclass(frozen=True)
class GraphUpdate:
    op: UpdateOp
    payload: Any

    @classmethod
    def add_node(cls, node: VnfInstance, role: str | None = None) -> GraphUpdate:
        return cls(UpdateOp.ADD_NODE, (node, role))

    @classmethod
    def remove_node(cls, node_id: str) -> GraphUpdate:
        return cls(UpdateOp.REMOVE_NODE, node_id)

    @classmethod
    def add_link(cls, link: Link) -> GraphUpdate:
        return cls(UpdateOp.ADD_LINK, link)

    @classmethod
    def remove_link(cls, link: Link) -> GraphUpdate:
        return cls(UpdateOp.REMOVE_LINK, link)

    @classmethod
    def set_rules(cls, node_id: str, rules: Iterable[Rule]) -> GraphUpdate:
        return cls(UpdateOp.SET_RULES, (node_id, tuple(rules)))


def _candidate(g: NFFG, u: GraphUpdate) -> NFFG:
    op = UpdateOp(u.op)
    if op is UpdateOp.ADD_NODE:
        node, role = u.payload
        if g.has_node(node.id):
            raise RejectedUpdate([Violation("duplicate-node", node.id, "node already exists")])
        endpoints = g.endpoints + ((Endpoint(node.id, role),) if role else ())
        return replace(g, nodes=g.nodes + (node,), endpoints=endpoints)
    if op is UpdateOp.REMOVE_NODE:
        nid = u.payload
        if not g.has_node(nid):
            raise RejectedUpdate([Violation("unknown-node", nid, "no such node")])
        return replace(
            g,
            nodes=tuple(n for n in g.nodes if n.id != nid),
            endpoints=tuple(e for e in g.endpoints if e.id != nid),
            rules=tuple(r for r in g.rules if r.node != nid),
        )
    if op is UpdateOp.ADD_LINK:
        return replace(g, links=g.links + (u.payload,))
    if op is UpdateOp.REMOVE_LINK:
        if u.payload not in g.links:
            raise RejectedUpdate([Violation("unknown-link", str(u.payload), "no such link")])
        return replace(g, links=tuple(l for l in g.links if l != u.payload))
    node_id, rules = u.payload
    if not g.has_node(node_id):
        raise RejectedUpdate([Violation("unknown-node", node_id, "no such node")])
    for r in rules:
        if r.node != node_id:
            raise RejectedUpdate([Violation("rule", r.node, f"rule for {r.node} in SET_RULES of {node_id}")])
    kept = tuple(r for r in g.rules if r.node != node_id)
    return replace(g, rules=kept + tuple(rules))


def apply_update(g: NFFG, u: GraphUpdate) -> NFFG:
    """Return the updated graph with ``version + 1``, or raise RejectedUpdate; ``g`` is never modified."""
    cand = _candidate(g, u)
    cand = replace(cand, version=g.version + 1)
    before = set(validate(g))
    introduced = [v for v in validate(cand) if v not in before]
    if introduced:
        raise RejectedUpdate(introduced)
    return cand


def apply_updates(g: NFFG, updates: Iterable[GraphUpdate]) -> NFFG:
    for u in updates:
        g = apply_update(g, u)
    return g


# --- file format ------------------------------------------------------------------


def nffg_to_json(g: NFFG) -> dict:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "config": config_to_json(n.config), "ports": list(n.ports)}
            for n in g.nodes
        ],
        "links": [{"from": [l.src_node, l.src_port], "to": [l.dst_node, l.dst_port]} for l in g.links],
        "endpoints": [{"id": e.id, "role": e.role} for e in g.endpoints],
        "rules": [
            {"node": r.node, "priority": r.priority, "match": r.match.to_match(), "out_port": r.out_port}
            for r in g.rules
        ],
        "version": g.version,
    }


def nffg_from_json(doc: dict) -> NFFG:
    try:
        nodes = tuple(
            VnfInstance(
                n["id"],
                VnfKind(n["kind"]),
                config_from_json(n["kind"], n.get("config")),
                tuple(n.get("ports", [])),
            )
            for n in doc.get("nodes", [])
        )
        links = tuple(Link(l["from"][0], l["from"][1], l["to"][0], l["to"][1]) for l in doc.get("links", []))
        endpoints = tuple(Endpoint(e["id"], e["role"]) for e in doc.get("endpoints", []))
        rules = tuple(
            Rule(r["node"], int(r.get("priority", 0)), PacketClass.from_match(r.get("match")), r["out_port"])
            for r in doc.get("rules", [])
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise NffgError(f"malformed NF-FG document: {exc!r}") from exc
    except ValueError as exc:
        raise NffgError(f"malformed NF-FG document: {exc}") from exc
    return NFFG(nodes, links, endpoints, rules, int(doc.get("version", 0)))


def dumps(g: NFFG) -> str:
    return json.dumps(nffg_to_json(g), indent=2)


def loads(text: str) -> NFFG:
    return nffg_from_json(json.loads(text))


def load(path: str | Path) -> NFFG:
    return loads(Path(path).read_text(encoding="utf-8"))


def dump(g: NFFG, path: str | Path) -> None:
    Path(path).write_text(dumps(g) + "\n", encoding="utf-8")
