"""Ready-made graphs and policy sets: the vCPE service, its elastic-firewall
variant, and small randomized chains for cross-checking against the oracle."""

from __future__ import annotations

import random

from .nffg import NFFG, Endpoint, GraphUpdate, Link, Rule, VnfInstance, apply_updates
from .packets import DOMAIN_MAX, FULL, IntervalSet, PacketClass
from .verifier import Policy, PolicyKind
from .vnf import (
    AclConfig,
    AclRule,
    AntispamConfig,
    LoadBalancerConfig,
    NatConfig,
    VnfKind,
    VpnConfig,
    WebCacheConfig,
    lb_buckets,
)

CLIENT = "client"
SERVER_A = "server_a"  # mail
SERVER_B = "server_b"  # other services
SERVER_C = "server_c"  # web
SERVER_IPS = {SERVER_A: 1001, SERVER_B: 1002, SERVER_C: 1003}
NAT_PUBLIC_IP = 40000

# (app class, server, permitted service ports, blocked port in the "mixed" ACL)
SERVICES = (
    ("EMAIL", SERVER_A, (25, 587), 587),
    ("WEB", SERVER_C, (80, 8080), 8080),
    ("OTHER", SERVER_B, (22, 23), 23),
)
ENTRY_PORT = {"EMAIL": "to_antispam", "WEB": "to_cache", "OTHER": "direct"}


def service_class(app: str, server: str, ports=None) -> PacketClass:
    match = {"app_class": [app], "dst_ip": [SERVER_IPS[server]]}
    if ports is not None:
        match["dst_port"] = list(ports)
    return PacketClass.from_match(match)


def acl_config(acl: str = "allow") -> AclConfig:
    if acl == "allow":
        return AclConfig()
    if acl == "block":
        rules = [AclRule(service_class(app, srv), "DENY") for app, srv, _, _ in SERVICES]
        return AclConfig(tuple(rules))
    if acl == "mixed":
        rules = [AclRule(FULL.with_(dst_port=IntervalSet.of(blocked)), "DENY") for *_, blocked in SERVICES]
        return AclConfig(tuple(rules))
    raise ValueError(f"unknown ACL preset {acl!r}")


def _client_rules() -> list[Rule]:
    rules = []
    for prio, (app, srv, ports, _) in zip((30, 20, 10), SERVICES):
        rules.append(Rule(CLIENT, prio, service_class(app, srv, ports), ENTRY_PORT[app]))
    return rules


def _nat_rules(nat: str) -> list[Rule]:
    return [
        Rule(nat, 10, FULL.with_(dst_ip=IntervalSet.point(ip)), f"to_{srv}") for srv, ip in SERVER_IPS.items()
    ]


def _edge_nodes() -> list[VnfInstance]:
    nodes = [VnfInstance(CLIENT, VnfKind.ENDPOINT, ports=tuple(ENTRY_PORT.values()))]
    nodes += [VnfInstance(s, VnfKind.ENDPOINT, ports=("in",)) for s in SERVER_IPS]
    nodes += [
        VnfInstance("antispam", VnfKind.ANTISPAM, AntispamConfig(), ("in", "out")),
        VnfInstance("webcache", VnfKind.WEB_CACHE, WebCacheConfig(), ("in", "out")),
        VnfInstance(
            "nat",
            VnfKind.NAT,
            NatConfig(NAT_PUBLIC_IP, IntervalSet.full()),
            ("in",) + tuple(f"to_{s}" for s in SERVER_IPS),
        ),
    ]
    return nodes


def _endpoints() -> list[Endpoint]:
    return [Endpoint(CLIENT, "client")] + [Endpoint(s, "server") for s in SERVER_IPS]


def vcpe_nffg(acl: str = "allow") -> NFFG:
    """The vCPE service with a single firewall: mail through anti-spam, web
    through the cache, everything else direct, all via firewall then NAT."""
    nodes = _edge_nodes() + [VnfInstance("fw", VnfKind.ACL_FW, acl_config(acl), ("in_spam", "in_cache", "in_direct", "out"))]
    links = [
        Link(CLIENT, "to_antispam", "antispam", "in"),
        Link(CLIENT, "to_cache", "webcache", "in"),
        Link(CLIENT, "direct", "fw", "in_direct"),
        Link("antispam", "out", "fw", "in_spam"),
        Link("webcache", "out", "fw", "in_cache"),
        Link("fw", "out", "nat", "in"),
    ] + [Link("nat", f"to_{s}", s, "in") for s in SERVER_IPS]
    rules = _client_rules() + [
        Rule("antispam", 0, FULL, "out"),
        Rule("webcache", 0, FULL, "out"),
        Rule("fw", 0, FULL, "out"),
    ] + _nat_rules("nat")
    return NFFG(tuple(nodes), tuple(links), tuple(_endpoints()), tuple(rules))


# --- elastic firewall variant ------------------------------------------------------

LB_IN = "lb_in"
LB_OUT = "lb_out"
FIREWALL_PREFIX = "fw_"


def firewall_id(k: int) -> str:
    return f"{FIREWALL_PREFIX}{k}"


def weighted_buckets(weights) -> list[IntervalSet]:
    """Contiguous src_ip ranges with sizes proportional to ``weights``."""
    total = float(sum(weights))
    size = DOMAIN_MAX + 1
    bounds = [0]
    acc = 0.0
    for w in weights:
        acc += w
        bounds.append(min(size, round(size * acc / total)))
    bounds[-1] = size
    return [IntervalSet([(a, b - 1)]) if b > a else IntervalSet() for a, b in zip(bounds, bounds[1:])]


def lb_rules(n: int, node: str = LB_IN, weights=None) -> list[Rule]:
    """src_ip bucket rules spreading traffic over firewall slots 1..n."""
    buckets = lb_buckets(n) if weights is None else weighted_buckets(weights)
    return [Rule(node, 100, FULL.with_(src_ip=b), f"fw{i + 1}") for i, b in enumerate(buckets) if b]


def skew_weights(n: int, skew: float | None) -> list[float] | None:
    """First instance takes ``skew`` of the traffic, the rest split evenly."""
    if skew is None or n == 1:
        return None
    return [skew] + [(1.0 - skew) / (n - 1)] * (n - 1)


def _firewall(k: int, acl: str) -> VnfInstance:
    return VnfInstance(firewall_id(k), VnfKind.ACL_FW, acl_config(acl), ("in", "out"))


def elastic_vcpe_nffg(
    acl: str = "allow", firewalls: int = 1, max_firewalls: int = 20, skew: float | None = None
) -> NFFG:
    """vCPE with the firewall replaced by a load-balanced group of instances.

    Both balancers carry one port per possible instance so scaling only
    adds links and rewrites the balancing rules.
    """
    if not 1 <= firewalls <= max_firewalls:
        raise ValueError("need 1 <= firewalls <= max_firewalls")
    slots = tuple(f"fw{k}" for k in range(1, max_firewalls + 1))
    nodes = _edge_nodes() + [
        VnfInstance(LB_IN, VnfKind.LOAD_BALANCER, LoadBalancerConfig(), ("in_spam", "in_cache", "in_direct") + slots),
        VnfInstance(LB_OUT, VnfKind.LOAD_BALANCER, LoadBalancerConfig(), slots + ("out",)),
    ]
    nodes += [_firewall(k, acl) for k in range(1, firewalls + 1)]
    links = [
        Link(CLIENT, "to_antispam", "antispam", "in"),
        Link(CLIENT, "to_cache", "webcache", "in"),
        Link(CLIENT, "direct", LB_IN, "in_direct"),
        Link("antispam", "out", LB_IN, "in_spam"),
        Link("webcache", "out", LB_IN, "in_cache"),
        Link(LB_OUT, "out", "nat", "in"),
    ] + [Link("nat", f"to_{s}", s, "in") for s in SERVER_IPS]
    rules = _client_rules() + [
        Rule("antispam", 0, FULL, "out"),
        Rule("webcache", 0, FULL, "out"),
        Rule(LB_OUT, 0, FULL, "out"),
    ] + _nat_rules("nat") + lb_rules(firewalls, weights=skew_weights(firewalls, skew))
    for k in range(1, firewalls + 1):
        links += [Link(LB_IN, f"fw{k}", firewall_id(k), "in"), Link(firewall_id(k), "out", LB_OUT, f"fw{k}")]
        rules.append(Rule(firewall_id(k), 0, FULL, "out"))
    return NFFG(tuple(nodes), tuple(links), tuple(_endpoints()), tuple(rules))


def balancers(g: NFFG) -> tuple[str, str]:
    """Ids of the balancers in front of and behind the firewall group."""
    fws = {n.id for n in g.nodes_of(VnfKind.ACL_FW)}
    front = sorted({l.src_node for l in g.links if l.dst_node in fws and g.node(l.src_node).kind is VnfKind.LOAD_BALANCER})
    back = sorted({l.dst_node for l in g.links if l.src_node in fws and g.node(l.dst_node).kind is VnfKind.LOAD_BALANCER})
    if len(front) != 1 or len(back) != 1:
        raise ValueError("graph has no elastic firewall group")
    return front[0], back[0]


def firewall_slots(g: NFFG) -> list[tuple[int, str]]:
    """(slot number, firewall id) pairs of the elastic group, by slot."""
    front, _ = balancers(g)
    out = []
    for l in g.links:
        if l.src_node == front and g.has_node(l.dst_node) and g.node(l.dst_node).kind is VnfKind.ACL_FW:
            out.append((int(l.src_port[2:]), l.dst_node))
    return sorted(out)


def firewall_count(g: NFFG) -> int:
    try:
        return len(firewall_slots(g))
    except ValueError:
        return len(g.nodes_of(VnfKind.ACL_FW))


def instance_shares(g: NFFG) -> dict[str, float]:
    """Fraction of the src_ip space the front balancer steers to each firewall."""
    front, _ = balancers(g)
    slot_to_fw = {f"fw{k}": fid for k, fid in firewall_slots(g)}
    shares = {fid: 0.0 for fid in slot_to_fw.values()}
    claimed = IntervalSet()
    for r in g.rules_for(front):
        fresh = r.match.src_ip.subtract(claimed)
        claimed = claimed.union(fresh)
        if r.out_port in slot_to_fw:
            shares[slot_to_fw[r.out_port]] += fresh.size() / (DOMAIN_MAX + 1)
    return shares


def _new_firewall_id(g: NFFG, template: str, k: int) -> str:
    stem = template.rstrip("0123456789")
    fid = f"{stem}{k}"
    while g.has_node(fid):
        fid += "_"
    return fid


def scale_out_updates(g: NFFG, weights=None) -> list[GraphUpdate]:
    """Add one instance (copying the first instance's ACL) and rebalance."""
    front, back = balancers(g)
    slots = firewall_slots(g)
    template = g.node(slots[0][1])
    k = len(slots) + 1
    fid = _new_firewall_id(g, template.id, k)
    node = VnfInstance(fid, VnfKind.ACL_FW, template.config, ("in", "out"))
    return [
        GraphUpdate.add_node(node),
        GraphUpdate.add_link(Link(fid, "out", back, f"fw{k}")),
        GraphUpdate.set_rules(fid, [Rule(fid, 0, FULL, "out")]),
        GraphUpdate.add_link(Link(front, f"fw{k}", fid, "in")),
        GraphUpdate.set_rules(front, lb_rules(k, front, weights)),
    ]


def scale_in_updates(g: NFFG, weights=None) -> list[GraphUpdate]:
    """Drain and remove the highest-slot instance."""
    front, back = balancers(g)
    slots = firewall_slots(g)
    n, fid = slots[-1]
    return [
        GraphUpdate.set_rules(front, lb_rules(len(slots) - 1, front, weights)),
        GraphUpdate.remove_link(Link(front, f"fw{n}", fid, "in")),
        GraphUpdate.remove_link(Link(fid, "out", back, f"fw{n}")),
        GraphUpdate.remove_node(fid),
    ]


def scaled(g: NFFG, firewalls: int) -> NFFG:
    while firewall_count(g) < firewalls:
        g = apply_updates(g, scale_out_updates(g))
    while firewall_count(g) > firewalls:
        g = apply_updates(g, scale_in_updates(g))
    return g


# --- policy sets ---------------------------------------------------------------


def vcpe_policies(acl: str = "mixed") -> list[Policy]:
    """Reach and isolate each server.

    With "mixed" all six hold: the first service port is permitted, the
    second is blocked by the ACL.  With "block" only isolation is asserted,
    with "allow" only reachability.
    """
    out = []
    for app, srv, ports, blocked in SERVICES:
        permitted = ports[0]
        tag = srv.split("_")[1]
        if acl in ("mixed", "allow"):
            out.append(
                Policy(PolicyKind.REACHABILITY, CLIENT, srv, service_class(app, srv, [permitted]), f"reach_{tag}")
            )
        if acl == "mixed":
            out.append(
                Policy(PolicyKind.ISOLATION, CLIENT, srv, service_class(app, srv, [blocked]), f"isolate_{tag}")
            )
        if acl == "block":
            out.append(Policy(PolicyKind.ISOLATION, CLIENT, srv, service_class(app, srv, ports), f"isolate_{tag}"))
    return out


# --- randomized reduced-domain chains --------------------------------------------------

SMALL = 4  # values 0..3 per integer field (2 bits each, 8 bits in total)
_INTS = ("src_ip", "dst_ip", "src_port", "dst_port")
_ENUMS = {"proto": ("TCP", "UDP"), "app_class": ("WEB", "EMAIL", "OTHER"), "spam_flag": ("HAM", "SPAM")}


def _rand_ints(rng: random.Random) -> IntervalSet:
    lo = rng.randrange(SMALL)
    hi = rng.randrange(lo, SMALL)
    parts = [(lo, hi)]
    if rng.random() < 0.3:
        v = rng.randrange(SMALL)
        parts.append((v, v))
    return IntervalSet(parts)


def random_class(rng: random.Random, density: float = 0.5) -> PacketClass:
    """A non-empty class confined to the reduced domain."""
    kw = {}
    for f in _INTS:
        kw[f] = _rand_ints(rng) if rng.random() < density else IntervalSet([(0, SMALL - 1)])
    for f, dom in _ENUMS.items():
        if rng.random() < density:
            kw[f] = frozenset(rng.sample(dom, rng.randint(1, len(dom))))
    return PacketClass(**kw)


def random_match(rng: random.Random) -> PacketClass:
    """Like random_class but may leave fields unconstrained over the full domain."""
    kw = {}
    for f in _INTS:
        if rng.random() < 0.35:
            kw[f] = _rand_ints(rng)
    for f, dom in _ENUMS.items():
        if rng.random() < 0.35:
            kw[f] = frozenset(rng.sample(dom, rng.randint(1, len(dom))))
    return PacketClass(**kw)


def _random_config(rng: random.Random, kind: VnfKind):
    if kind is VnfKind.NAT:
        return NatConfig(rng.randrange(SMALL), _rand_ints(rng))
    if kind is VnfKind.ACL_FW:
        rules = tuple(AclRule(random_match(rng), rng.choice(("PERMIT", "DENY"))) for _ in range(rng.randint(0, 3)))
        return AclConfig(rules, rng.choice(("PERMIT", "DENY", "PERMIT")))
    if kind is VnfKind.VPN_GW:
        return VpnConfig(rng.randrange(SMALL), rng.randrange(SMALL), _rand_ints(rng))
    if kind is VnfKind.WEB_CACHE:
        return WebCacheConfig()
    return AntispamConfig()


_MIDDLE_KINDS = (VnfKind.NAT, VnfKind.ACL_FW, VnfKind.ACL_FW, VnfKind.WEB_CACHE, VnfKind.ANTISPAM, VnfKind.VPN_GW)


def random_chain_nffg(rng: random.Random) -> NFFG:
    """A line of 0-4 random VNFs from one client to two servers.

    The last hop is either a bucketed load balancer or dst_ip rules; some
    nodes steer a random class into an unconnected port.
    """
    k = rng.randint(0, 4)
    mids = [f"m{i}" for i in range(k)]
    nodes = [VnfInstance("c", VnfKind.ENDPOINT, ports=("out", "void"))]
    nodes += [VnfInstance(s, VnfKind.ENDPOINT, ports=("in",)) for s in ("s1", "s2")]
    rules: list[Rule] = []
    links: list[Link] = []
    for m in mids:
        kind = rng.choice(_MIDDLE_KINDS)
        nodes.append(VnfInstance(m, kind, _random_config(rng, kind), ("in", "out", "void")))
    last = "lb"
    if rng.random() < 0.5:
        cut = rng.randrange(1, SMALL)
        buckets = None
        if rng.random() < 0.7:
            buckets = (IntervalSet([(0, cut - 1)]), IntervalSet([(cut, 65535)]))
        cfg = LoadBalancerConfig(("s1", "s2"), buckets)
    else:
        cfg = LoadBalancerConfig()
        split = _rand_ints(rng)
        rules.append(Rule(last, 10, FULL.with_(dst_ip=split), "p1"))
        rules.append(Rule(last, 0, FULL, "p2"))
    nodes.append(VnfInstance(last, VnfKind.LOAD_BALANCER, cfg, ("in", "p1", "p2")))
    links += [Link(last, "p1", "s1", "in"), Link(last, "p2", "s2", "in")]

    seq = ["c"] + mids + [last]
    for a, b in zip(seq, seq[1:]):
        links.append(Link(a, "out", b, "in"))
        if rng.random() < 0.3:
            rules.append(Rule(a, rng.randint(1, 5), random_match(rng), "void"))
        if a == "c":
            for _ in range(rng.randint(1, 2)):
                rules.append(Rule(a, rng.randint(0, 5), random_match(rng), "out"))
        else:
            rules.append(Rule(a, 0, FULL, "out"))
    endpoints = [Endpoint("c", "client"), Endpoint("s1", "server"), Endpoint("s2", "server")]
    return NFFG(tuple(nodes), tuple(links), tuple(endpoints), tuple(rules))


def random_policy(rng: random.Random, kind: PolicyKind | None = None, index: int = 0) -> Policy:
    kind = kind or rng.choice(list(PolicyKind))
    return Policy(kind, "c", rng.choice(("s1", "s2")), random_class(rng), f"r{index}")


def random_fixture(rng: random.Random, index: int = 0) -> tuple[NFFG, Policy]:
    """A random graph and policy for which the symbolic engine has a chain to check."""
    from .nffg import extract_chains

    while True:
        g = random_chain_nffg(rng)
        p = random_policy(rng, index=index)
        if any(c.server == p.dst for c in extract_chains(g)):
            return g, p
