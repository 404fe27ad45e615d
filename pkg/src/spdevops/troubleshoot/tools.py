"""Tool adapters: the probes a troubleshooting graph can run against a simulation.

Targets are symbolic so graphs survive renaming of concrete node ids:

* ``firewall_group``: the load-balanced firewall instances, in slot order
* ``webcache_nat_link``: the link leaving the web cache towards NAT
* a VNF kind (``ACL_FW``, ``NAT``...): every instance of that kind
* ``a->b``: an explicit link; a bare node id names that node
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import fixtures
from ..nffg import NFFG
from ..oracle import replay
from ..scenario import APPS, Simulation
from ..vnf import VnfKind


class UnknownTool(KeyError):
    pass


class UnknownTarget(LookupError):
    pass


class UnresolvedReference(UnknownTarget):
    """A symbolic reference that has no match in the current graph."""


@dataclass
class ToolResult:
    tool: str
    values: dict = field(default_factory=dict)
    raw: str = ""

    def to_json(self) -> dict:
        return {"tool": self.tool, "values": self.values, "raw": self.raw}


_KINDS = {k.value for k in VnfKind}


def resolve_nodes(g: NFFG, target: str) -> list[str]:
    if target == "firewall_group":
        try:
            return [fid for _, fid in fixtures.firewall_slots(g)]
        except ValueError:
            raise UnresolvedReference("graph has no load-balanced firewall group") from None
    if target in _KINDS:
        ids = [n.id for n in g.nodes_of(target)]
        if not ids:
            raise UnresolvedReference(f"no {target} instance in the graph")
        return ids
    if g.has_node(target):
        return [target]
    raise UnknownTarget(f"unknown node target {target!r}")


def resolve_link(g: NFFG, target: str) -> tuple[str, str]:
    if target == "webcache_nat_link":
        caches = g.nodes_of(VnfKind.WEB_CACHE)
        if len(caches) != 1:
            raise UnresolvedReference(f"expected one web cache, found {len(caches)}")
        outs = sorted({l.dst_node for l in g.links if l.src_node == caches[0].id})
        if len(outs) != 1:
            raise UnresolvedReference("web cache has no single outgoing link")
        return caches[0].id, outs[0]
    if "->" in target:
        src, dst = (s.strip() for s in target.split("->", 1))
        if not any(l.src_node == src and l.dst_node == dst for l in g.links):
            raise UnknownTarget(f"no link {src} -> {dst}")
        return src, dst
    raise UnknownTarget(f"unknown link target {target!r}")


def _arg(args: dict, positional: tuple, name: str, index: int, default=None, required: bool = False):
    if name in args:
        return args[name]
    if index < len(positional):
        return positional[index]
    if required:
        raise TypeError(f"missing argument {name!r}")
    return default


def traffic_gen(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    rate = float(_arg(args, pos, "rate", 0, required=True))
    duration = float(_arg(args, pos, "duration", 1, required=True))
    app = _arg(args, pos, "app", 2)
    if app is not None and app not in APPS:
        raise UnknownTarget(f"unknown application class {app!r}")
    before = sim.window_index
    sim.inject(rate, duration, app)
    sim.advance(duration)
    offered = sim.offered_total()
    return ToolResult(
        "traffic_gen",
        {"offered": offered, "delta": rate, "windows": sim.window_index - before},
        f"injected {rate:g} Mbit/s of {app or 'mixed'} traffic for {duration:g} s; offered now {offered:.1f}",
    )


def vnf_count(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    kind = str(_arg(args, pos, "kind", 0, required=True))
    if kind not in _KINDS:
        raise UnknownTarget(f"unknown VNF kind {kind!r}")
    n = len(sim.graph.nodes_of(kind))
    return ToolResult("vnf_count", {"count": n}, f"{n} {kind} instance(s)")


def link_load(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    target = str(_arg(args, pos, "target", 0, required=True))
    windows = int(_arg(args, pos, "windows", 1, default=3))
    src, dst = resolve_link(sim.graph, target)
    rate = sim.link_rate(src, dst, windows)
    load = rate / sim.cfg.capacity
    return ToolResult("link_load", {"load": load, "rate": rate}, f"{target}: {rate:.1f} Mbit/s, utilization {load:.3f}")


def cpu_load(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    target = str(_arg(args, pos, "target", 0, default="firewall_group"))
    ids = resolve_nodes(sim.graph, target)
    shares = sim.shares()
    offered = sim.offered_total()
    cpu = [100.0 * shares.get(i, 0.0) * offered / sim.cfg.capacity for i in ids]
    return ToolResult(
        "cpu_load", {"cpu": cpu, "instances": len(ids)}, f"{target}: " + ", ".join(f"{c:.1f}%" for c in cpu)
    )


def rate_risk(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    target = str(_arg(args, pos, "target", 0, default="firewall_group"))
    ids = resolve_nodes(sim.graph, target)
    risks = [sim.latest_risk(i) for i in ids]
    return ToolResult("rate_risk", {"risk": max(risks), "risks": risks}, f"{target}: max risk {max(risks):.4f}")


def ping_path(sim: Simulation, args: dict, pos: tuple = ()) -> ToolResult:
    """Replay one concrete packet of an application class from the client."""
    app = str(_arg(args, pos, "app", 0, required=True))
    g = sim.graph
    clients = g.clients
    if not clients:
        raise UnresolvedReference("graph has no client endpoint")
    src = clients[0]
    packet = None
    for rule in g.rules_for(src):
        if app in rule.match.app_class:
            k = rule.match.with_(app_class=frozenset([app]))
            if "HAM" in k.spam_flag:
                k = k.with_(spam_flag=frozenset(["HAM"]))
            packet = k.sample()
            break
    if packet is None:
        raise UnknownTarget(f"the client sends no {app} traffic")
    paths = replay(g, packet, src)
    servers = set(g.servers)
    delivered = [p for p in paths if p[-1] in servers]
    hops = max(delivered or paths, key=len)
    kinds = [g.node(h).kind.value for h in hops]
    return ToolResult(
        "ping_path",
        {"delivered": bool(delivered), "length": len(hops), "hops": kinds},
        " -> ".join(hops),
    )


TOOLS = {
    "traffic_gen": traffic_gen,
    "vnf_count": vnf_count,
    "link_load": link_load,
    "cpu_load": cpu_load,
    "ping_path": ping_path,
    "rate_risk": rate_risk,
}


def tool_adapter(name: str, args: dict, sim: Simulation, positional: tuple = ()) -> ToolResult:
    fn = TOOLS.get(name)
    if fn is None:
        raise UnknownTool(name)
    return fn(sim, dict(args), tuple(positional))
