"""Brute-force reachability by enumerating concrete packets.

Deliberately independent of the symbolic engine: it reads the graph in its
serialized JSON form and simulates one concrete packet at a time, exploring
both resolutions of every nondeterministic (cache hit/miss) step.
"""

from __future__ import annotations

import itertools

from .nffg import NFFG, nffg_to_json

INT_FIELDS = ("src_ip", "dst_ip", "src_port", "dst_port")
ENUMS = {
    "proto": ("TCP", "UDP"),
    "app_class": ("WEB", "EMAIL", "OTHER"),
    "spam_flag": ("HAM", "SPAM"),
}
MAX_DOMAIN_BITS = 8
MAX_HOPS = 64
SPACE = 1 << 16


class DomainTooLarge(ValueError):
    pass


def field_bits(domain_bits: int) -> dict[str, int]:
    """Split the bit budget over the four integer fields (remainder to the first ones)."""
    if not 0 <= domain_bits <= MAX_DOMAIN_BITS:
        raise DomainTooLarge(f"domain_bits must be within 0..{MAX_DOMAIN_BITS}, got {domain_bits}")
    base, extra = divmod(domain_bits, len(INT_FIELDS))
    return {f: base + (1 if i < extra else 0) for i, f in enumerate(INT_FIELDS)}


def _in_intervals(value: int, intervals) -> bool:
    for lo, hi in intervals:
        if lo <= value <= hi:
            return True
    return False


def _matches(packet: dict, match: dict) -> bool:
    for f in INT_FIELDS:
        if f in match and not _in_intervals(packet[f], match[f]):
            return False
    for f in ENUMS:
        if f in match and packet[f] not in match[f]:
            return False
    return True


class _Net:
    def __init__(self, doc: dict):
        self.nodes = {n["id"]: n for n in doc["nodes"]}
        self.links = {(l["from"][0], l["from"][1]): l["to"][0] for l in doc["links"]}
        self.roles = {e["id"]: e["role"] for e in doc["endpoints"]}
        rules: dict[str, list] = {}
        for i, r in enumerate(doc["rules"]):
            rules.setdefault(r["node"], []).append((-r["priority"], i, r))
        self.rules = {k: [r for _, _, r in sorted(v)] for k, v in rules.items()}

    def next_by_rules(self, node: str, packet: dict) -> str | None:
        for r in self.rules.get(node, []):
            if _matches(packet, r["match"]):
                return self.links.get((node, r["out_port"]))
        return None

    def neighbor_port_node(self, node: str, neighbor: str) -> str | None:
        for (src, _port), dst in self.links.items():
            if src == node and dst == neighbor:
                return dst
        return None

    def step(self, node: str, packet: dict) -> list[tuple[str, dict]]:
        """Concrete behavior of one VNF: list of (next node, packet) continuations."""
        spec = self.nodes[node]
        kind, cfg = spec["kind"], spec.get("config") or {}
        pkt = dict(packet)
        if kind == "NAT":
            if _in_intervals(pkt["src_ip"], cfg["internal_prefix"]):
                pkt["src_ip"] = cfg["public_ip"]
        elif kind == "ACL_FW":
            action = cfg.get("default", "PERMIT")
            for rule in cfg.get("rules", []):
                if _matches(pkt, rule.get("match") or {}):
                    action = rule["action"]
                    break
            if action == "DENY":
                return []
        elif kind == "ANTISPAM":
            if pkt["spam_flag"] == "SPAM":
                return []
        elif kind == "VPN_GW":
            if _in_intervals(pkt["src_ip"], cfg["inner_prefix"]):
                pkt["src_ip"] = cfg["tunnel_src"]
                pkt["dst_ip"] = cfg["tunnel_dst"]
        elif kind == "LOAD_BALANCER" and cfg.get("backends"):
            backends = cfg["backends"]
            buckets = cfg.get("buckets")
            if buckets is None:
                idx = pkt["src_ip"] * len(backends) // SPACE
            else:
                idx = next((i for i, b in enumerate(buckets) if _in_intervals(pkt["src_ip"], b)), None)
                if idx is None:
                    return []
            target = self.neighbor_port_node(node, backends[idx])
            return [(target, pkt)] if target else []
        nxt = self.next_by_rules(node, pkt)
        return [(nxt, pkt)] if nxt else []


def replay(g: NFFG, packet: dict, start: str) -> list[list[str]]:
    """All hop lists a concrete packet can take from ``start`` until it stops.

    A hop list ends at an endpoint (delivery) or at the node that consumed it.
    """
    return _replay(_Net(nffg_to_json(g)), packet, start)


def _replay(net: _Net, packet: dict, start: str) -> list[list[str]]:
    first = net.next_by_rules(start, packet)
    if first is None:
        return [[start]]
    paths = []
    stack = [(first, dict(packet), [start, first])]
    while stack:
        node, pkt, hops = stack.pop()
        kind = net.nodes[node]["kind"]
        if kind == "ENDPOINT" or len(hops) > MAX_HOPS:
            paths.append(hops)
            continue
        conts = net.step(node, pkt)
        if not conts or (kind == "WEB_CACHE" and pkt["app_class"] == "WEB"):
            # consumed here; for a cache this is the hit branch, the miss continues below
            paths.append(hops)
        for nxt, p2 in reversed(conts):
            stack.append((nxt, p2, hops + [nxt]))
    return paths


def arrives(g: NFFG, packet: dict, src: str, dst: str) -> bool:
    return any(p[-1] == dst for p in replay(g, packet, src))


def _values(match: dict, name: str, bits: int) -> list:
    if name in ENUMS:
        allowed = match.get(name)
        return [v for v in ENUMS[name] if allowed is None or v in allowed]
    # the smallest 2**bits values the policy allows; exhaustive when the
    # class fits inside that budget, a sample of it otherwise
    limit = 1 << bits
    out: list[int] = []
    for lo, hi in sorted(match.get(name, [[0, SPACE - 1]])):
        out.extend(range(lo, min(hi, lo + limit - len(out) - 1) + 1))
        if len(out) >= limit:
            break
    return out


def enumerate_packets(match: dict, domain_bits: int):
    bits = field_bits(domain_bits)
    names = INT_FIELDS + tuple(ENUMS)
    axes = [_values(match, n, bits.get(n, 0)) for n in names]
    for combo in itertools.product(*axes):
        yield dict(zip(names, combo))


def oracle_reachability(g: NFFG, policy, domain_bits: int = 8) -> bool:
    """True iff some packet of the policy traffic (within the reduced domain) reaches ``policy.dst``."""
    field_bits(domain_bits)
    net = _Net(nffg_to_json(g))
    match = policy.traffic.to_match()
    for pkt in enumerate_packets(match, domain_bits):
        if any(p[-1] == policy.dst for p in _replay(net, pkt, policy.src)):
            return True
    return False
