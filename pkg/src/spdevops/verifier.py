"""Reachability and isolation checks over extracted chains."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .nffg import NFFG, Chain, NffgError, extract_chains, refine_origin, route, validate
from .packets import PacketClass, PacketSet
from .vnf import FORWARD, Action, BindingTable, VnfKind, transfer


class PolicyKind(str, Enum):
    REACHABILITY = "REACHABILITY"
    ISOLATION = "ISOLATION"


class VerificationError(Exception):
    pass


class NoChainError(VerificationError):
    pass


class NotIsolatedError(VerificationError):
    pass


class InvalidGraph(VerificationError):
    pass


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    src: str
    dst: str
    traffic: PacketClass
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.traffic.is_empty():
            raise ValueError("policy traffic must be non-empty")

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "from": self.src, "to": self.dst, "traffic": self.traffic.to_match()}
        if self.id:
            out["id"] = self.id
        return out

    @classmethod
    def from_json(cls, raw: dict, index: int = 0) -> Policy:
        return cls(
            PolicyKind(raw["kind"]),
            raw["from"],
            raw["to"],
            PacketClass.from_match(raw.get("traffic")),
            raw.get("id") or f"p{index}",
        )


def load_policies(text: str) -> list[Policy]:
    return [Policy.from_json(r, i) for i, r in enumerate(json.loads(text))]


def dump_policies(policies: Iterable[Policy]) -> str:
    return json.dumps([p.to_json() for p in policies], indent=2)


@dataclass(frozen=True)
class Cause:
    node: str
    kind: str


@dataclass
class Verdict:
    policy_id: str
    kind: PolicyKind
    holds: bool
    witness: dict | None = None
    cause: Cause | None = None
    elapsed_ms: float = 0.0
    prefix_checks: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "kind": self.kind.value,
            "holds": self.holds,
            "witness": self.witness,
            "cause": None if self.cause is None else {"node": self.cause.node, "kind": self.cause.kind},
            "elapsed_ms": round(self.elapsed_ms, 3),
            "prefix_checks": self.prefix_checks,
            "error": self.error,
        }

    def same_outcome(self, other: Verdict) -> bool:
        """Equality ignoring timing (and the concrete node a cause names)."""
        return (
            self.holds == other.holds
            and self.error == other.error
            and (self.cause is None) == (other.cause is None)
            and (self.cause is None or self.cause.kind == other.cause.kind)
        )


# --- propagation -------------------------------------------------------------


@dataclass
class _Flow:
    origin: PacketClass
    current: PacketClass
    rewritten: frozenset = frozenset()
    bindings: BindingTable = field(default_factory=BindingTable)


def _toward(g: NFFG, node_id: str, flow: _Flow, disposition, nxt: str) -> list[_Flow]:
    """Sub-flows of a forwarded outcome that leave ``node_id`` toward ``nxt``."""
    if disposition.next_hop is not None:
        return [flow] if disposition.next_hop == nxt else []
    if disposition.out_port is not None:
        link = g.link_from(node_id, disposition.out_port)
        return [flow] if link is not None and link.dst_node == nxt else []
    out = []
    for sub, port in route(g, node_id, flow.current):
        link = g.link_from(node_id, port)
        if link is not None and link.dst_node == nxt:
            out.append(
                _Flow(refine_origin(flow.origin, sub, flow.rewritten), sub, flow.rewritten, flow.bindings)
            )
    return out


def propagate(g: NFFG, chain: Chain, traffic: PacketSet, stop: int | None = None) -> list[list[_Flow]]:
    """Flows entering each chain position; ``stages[i]`` enters ``chain.nodes[i]``.

    MAY branches are all kept (union), so a non-empty final stage means some
    packet and some branch resolution reach the server.
    """
    path = chain.path
    last = len(path) - 1 if stop is None else min(stop, len(path) - 1)
    start = [_Flow(c, c) for c in traffic.intersect(chain.traffic)]
    stages: list[list[_Flow]] = [start]
    flows = []
    for f in start:
        flows.extend(_toward(g, path[0], f, FORWARD, path[1]))
    stages.append(flows)
    for i in range(1, last):
        node = chain.nodes[i]
        nxt = []
        for f in flows:
            result = transfer(node.config, f.current, bindings=f.bindings)
            for o in result.outcomes:
                if o.disposition.action is not Action.FORWARD:
                    continue
                moved = _Flow(
                    refine_origin(f.origin, o.source, f.rewritten),
                    o.klass,
                    f.rewritten | o.rewrites,
                    result.bindings,
                )
                nxt.extend(_toward(g, node.id, moved, o.disposition, path[i + 1]))
        flows = [f for f in nxt if not f.current.is_empty()]
        stages.append(flows)
    return stages


def _chains_for(g: NFFG, p: Policy, chains: Sequence[Chain] | None) -> list[Chain]:
    if chains is None:
        problems = validate(g)
        if problems:
            raise InvalidGraph("; ".join(map(str, problems)))
        chains = extract_chains(g)
    matching = [c for c in chains if c.client == p.src and c.server == p.dst]
    if not matching:
        raise NoChainError(f"no chain connects {p.src} to {p.dst}")
    return matching


def _arrival(g: NFFG, p: Policy, chains: Sequence[Chain] | None):
    traffic = PacketSet([p.traffic])
    for chain in _chains_for(g, p, chains):
        stages = propagate(g, chain, traffic)
        if stages[-1]:
            return chain, stages[-1][0]
    return None, None


def check_reachability(g: NFFG, p: Policy, chains: Sequence[Chain] | None = None) -> Verdict:
    t0 = time.perf_counter()
    chain, flow = _arrival(g, p, chains)
    witness = None
    if flow is not None:
        witness = {
            "packet": flow.origin.sample(),
            "delivered": flow.current.sample(),
            "path": list(chain.path),
        }
    return Verdict(p.id, p.kind, flow is not None, witness, elapsed_ms=(time.perf_counter() - t0) * 1e3)


def check_isolation(g: NFFG, p: Policy, chains: Sequence[Chain] | None = None) -> Verdict:
    t0 = time.perf_counter()
    _, flow = _arrival(g, p, chains)
    return Verdict(p.id, p.kind, flow is None, elapsed_ms=(time.perf_counter() - t0) * 1e3)


def _dies_at(stages: list[list[_Flow]], lo: int, hi: int) -> int | None:
    for k in range(lo, hi):
        if stages[k] and not stages[k + 1]:
            return k
    return None


def root_cause_isolation(g: NFFG, p: Policy, chains: Sequence[Chain] | None = None) -> Verdict:
    """Attribute a holding isolation to the first node where the traffic dies.

    Prefix reachability is checked up to each firewall in turn: traffic that
    reaches a firewall but not past it is blamed on that firewall's ACL,
    traffic that never reaches it on the earlier node that stopped it.
    """
    t0 = time.perf_counter()
    matching = _chains_for(g, p, chains)
    traffic = PacketSet([p.traffic])
    checks = 0
    cause = None
    for chain in matching:
        if traffic.intersect(chain.traffic).is_empty():
            continue
        full = propagate(g, chain, traffic)
        if full[-1]:
            raise NotIsolatedError(f"{p.id}: traffic reaches {p.dst} via {chain}")
        firewalls = [i for i, n in enumerate(chain.nodes) if n.kind is VnfKind.ACL_FW]
        for i in firewalls:
            checks += 1
            stages = propagate(g, chain, traffic, stop=i + 1)
            if not stages[i]:
                k = _dies_at(stages, 0, i)
                cause = Cause(chain.path[k], chain.nodes[k].kind.value)
                break
            if not stages[i + 1]:
                cause = Cause(chain.path[i], chain.nodes[i].kind.value)
                break
        else:
            checks += 1
            k = _dies_at(full, 0, len(full) - 1)
            cause = Cause(chain.path[k], chain.nodes[k].kind.value)
        break
    if cause is None:
        # the client never steers this traffic toward the server
        cause = Cause(p.src, VnfKind.ENDPOINT.value)
    return Verdict(
        p.id, p.kind, True, cause=cause, prefix_checks=checks, elapsed_ms=(time.perf_counter() - t0) * 1e3
    )


def verify_one(g: NFFG, p: Policy, chains: Sequence[Chain], root_cause: bool = True) -> Verdict:
    t0 = time.perf_counter()
    try:
        if p.kind is PolicyKind.REACHABILITY:
            v = check_reachability(g, p, chains)
        else:
            v = check_isolation(g, p, chains)
            if v.holds and root_cause:
                rc = root_cause_isolation(g, p, chains)
                v.cause, v.prefix_checks = rc.cause, rc.prefix_checks
    except (VerificationError, NffgError, ValueError) as exc:
        v = Verdict(p.id, p.kind, False, error=f"{type(exc).__name__}: {exc}")
    v.elapsed_ms = (time.perf_counter() - t0) * 1e3
    return v


def verify_policy_set(
    g: NFFG, policies: Sequence[Policy], root_cause: bool = True, max_workers: int | None = None
) -> list[Verdict]:
    if not policies:
        return []
    problems = validate(g)
    if problems:
        msg = "InvalidGraph: " + "; ".join(map(str, problems))
        return [Verdict(p.id, p.kind, False, error=msg) for p in policies]
    try:
        chains = extract_chains(g)
    except NffgError as exc:
        return [Verdict(p.id, p.kind, False, error=f"{type(exc).__name__}: {exc}") for p in policies]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return list(pool.map(lambda p: verify_one(g, p, chains, root_cause), policies))
    return [verify_one(g, p, chains, root_cause) for p in policies]


def timing_summary(verdicts: Sequence[Verdict]) -> dict:
    out = {}
    for kind in PolicyKind:
        times = [v.elapsed_ms for v in verdicts if v.kind is kind]
        if times:
            out[kind.value] = {
                "count": len(times),
                "mean_ms": statistics.fmean(times),
                "median_ms": statistics.median(times),
                "max_ms": max(times),
            }
    return out


def timing_csv(verdicts: Sequence[Verdict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy_id", "kind", "holds", "elapsed_ms"])
    for v in verdicts:
        w.writerow([v.policy_id, v.kind.value, str(v.holds).lower(), f"{v.elapsed_ms:.3f}"])
    return buf.getvalue()


def all_hold(verdicts: Sequence[Verdict]) -> bool:
    return all(v.holds and v.error is None for v in verdicts)

