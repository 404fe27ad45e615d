"""Behavioral models of the VNF catalog as transfer functions over packet classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

from .packets import (
    DOMAIN_MAX,
    EMPTY,
    FULL,
    IntervalSet,
    PacketClass,
    PacketSet,
    _parse_intervals,
    pc_intersect,
    pc_subtract,
)


class VnfKind(str, Enum):
    NAT = "NAT"
    ACL_FW = "ACL_FW"
    WEB_CACHE = "WEB_CACHE"
    ANTISPAM = "ANTISPAM"
    VPN_GW = "VPN_GW"
    LOAD_BALANCER = "LOAD_BALANCER"
    ENDPOINT = "ENDPOINT"


class Action(str, Enum):
    FORWARD = "FORWARD"
    DROP = "DROP"
    ANSWER_LOCALLY = "ANSWER_LOCALLY"


class Branch(str, Enum):
    MUST = "MUST"
    MAY = "MAY"


class Direction(str, Enum):
    FORWARD_PATH = "FORWARD_PATH"
    RETURN_PATH = "RETURN_PATH"


class UnknownBinding(Exception):
    """A return-path class has no recorded NAT/VPN binding (strict mode)."""


# --- configuration variants -------------------------------------------------


@dataclass(frozen=True)
class NatConfig:
    public_ip: int
    internal_prefix: IntervalSet

    def __post_init__(self):
        if not self.internal_prefix:
            raise ValueError("NAT internal_prefix must be non-empty")

    kind = VnfKind.NAT


@dataclass(frozen=True)
class AclRule:
    match: PacketClass
    action: str  # PERMIT | DENY

    def __post_init__(self):
        if self.action not in ("PERMIT", "DENY"):
            raise ValueError(f"ACL action must be PERMIT or DENY, got {self.action!r}")


@dataclass(frozen=True)
class AclConfig:
    rules: tuple[AclRule, ...] = ()
    default: str = "PERMIT"

    def __post_init__(self):
        if self.default not in ("PERMIT", "DENY"):
            raise ValueError(f"ACL default must be PERMIT or DENY, got {self.default!r}")
        object.__setattr__(self, "rules", tuple(self.rules))

    kind = VnfKind.ACL_FW


@dataclass(frozen=True)
class WebCacheConfig:
    kind = VnfKind.WEB_CACHE


@dataclass(frozen=True)
class AntispamConfig:
    kind = VnfKind.ANTISPAM


@dataclass(frozen=True)
class VpnConfig:
    tunnel_src: int
    tunnel_dst: int
    inner_prefix: IntervalSet

    kind = VnfKind.VPN_GW


@dataclass(frozen=True)
class LoadBalancerConfig:
    """Backends are node ids; ``buckets`` optionally pins each backend's src_ip share.

    With no backends the balancer is a plain switch driven by forwarding rules.
    """

    backends: tuple[str, ...] = ()
    buckets: tuple[IntervalSet, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "backends", tuple(self.backends))
        if self.buckets is not None:
            object.__setattr__(self, "buckets", tuple(self.buckets))
            if len(self.buckets) != len(self.backends):
                raise ValueError("one bucket per backend required")

    kind = VnfKind.LOAD_BALANCER

    def bucket_sets(self) -> tuple[IntervalSet, ...]:
        if self.buckets is not None:
            return self.buckets
        return lb_buckets(len(self.backends))


@dataclass(frozen=True)
class EndpointConfig:
    kind = VnfKind.ENDPOINT


VnfConfig = Union[
    NatConfig, AclConfig, WebCacheConfig, AntispamConfig, VpnConfig, LoadBalancerConfig, EndpointConfig
]


def lb_buckets(n: int, hi: int = DOMAIN_MAX) -> tuple[IntervalSet, ...]:
    """Contiguous hash buckets: ``src_ip`` lands in bucket ``src_ip * n // (hi + 1)``."""
    if n <= 0:
        return ()
    size = hi + 1
    bounds = [-(-i * size // n) for i in range(n + 1)]  # ceil(i * size / n)
    return tuple(
        IntervalSet([(bounds[i], bounds[i + 1] - 1)]) if bounds[i + 1] > bounds[i] else IntervalSet()
        for i in range(n)
    )


def config_from_json(kind: VnfKind | str, raw: Mapping | None) -> VnfConfig:
    kind = VnfKind(kind)
    raw = dict(raw or {})
    if kind is VnfKind.NAT:
        return NatConfig(int(raw["public_ip"]), _parse_intervals(raw["internal_prefix"]))
    if kind is VnfKind.ACL_FW:
        rules = tuple(
            AclRule(PacketClass.from_match(r.get("match")), r["action"]) for r in raw.get("rules", [])
        )
        return AclConfig(rules, raw.get("default", "PERMIT"))
    if kind is VnfKind.WEB_CACHE:
        return WebCacheConfig()
    if kind is VnfKind.ANTISPAM:
        return AntispamConfig()
    if kind is VnfKind.VPN_GW:
        return VpnConfig(
            int(raw["tunnel_src"]), int(raw["tunnel_dst"]), _parse_intervals(raw["inner_prefix"])
        )
    if kind is VnfKind.LOAD_BALANCER:
        buckets = raw.get("buckets")
        return LoadBalancerConfig(
            tuple(raw.get("backends", [])),
            None if buckets is None else tuple(_parse_intervals(b) for b in buckets),
        )
    return EndpointConfig()


def _intervals_json(s: IntervalSet) -> list:
    return [list(iv) for iv in s.intervals]


def config_to_json(config: VnfConfig) -> dict:
    if isinstance(config, NatConfig):
        return {"public_ip": config.public_ip, "internal_prefix": _intervals_json(config.internal_prefix)}
    if isinstance(config, AclConfig):
        return {
            "rules": [{"match": r.match.to_match(), "action": r.action} for r in config.rules],
            "default": config.default,
        }
    if isinstance(config, VpnConfig):
        return {
            "tunnel_src": config.tunnel_src,
            "tunnel_dst": config.tunnel_dst,
            "inner_prefix": _intervals_json(config.inner_prefix),
        }
    if isinstance(config, LoadBalancerConfig):
        out: dict = {"backends": list(config.backends)}
        if config.buckets is not None:
            out["buckets"] = [_intervals_json(b) for b in config.buckets]
        return out
    return {}


# --- outcomes and bindings ----------------------------------------------------


@dataclass(frozen=True)
class Disposition:
    action: Action
    out_port: str | None = None
    next_hop: str | None = None

    def __str__(self):
        if self.action is not Action.FORWARD:
            return self.action.value
        target = self.out_port or self.next_hop
        return f"FORWARD({target})" if target else "FORWARD"


FORWARD = Disposition(Action.FORWARD)
DROP = Disposition(Action.DROP)
ANSWER_LOCALLY = Disposition(Action.ANSWER_LOCALLY)


@dataclass(frozen=True)
class Outcome:
    """One branch of a transfer.

    ``source`` is the sub-class of the input that takes this branch and
    ``klass`` the class leaving the VNF (they differ only for rewriting VNFs);
    ``rewrites`` names the header fields that were assigned.
    """

    klass: PacketClass
    disposition: Disposition
    branch: Branch = Branch.MUST
    source: PacketClass | None = None
    rewrites: frozenset = frozenset()

    def __post_init__(self):
        if self.source is None:
            object.__setattr__(self, "source", self.klass)


@dataclass(frozen=True)
class NatBinding:
    translated: PacketClass
    original_src: IntervalSet


@dataclass(frozen=True)
class VpnBinding:
    outer: PacketClass
    inner: PacketClass


@dataclass(frozen=True)
class BindingTable:
    """Verification-scoped NAT/VPN state; every update returns a new table."""

    nat: tuple[NatBinding, ...] = ()
    vpn: tuple[VpnBinding, ...] = ()

    def with_nat(self, translated: PacketClass, original_src: IntervalSet) -> BindingTable:
        entries = list(self.nat)
        for i, b in enumerate(entries):
            if b.translated == translated:
                entries[i] = NatBinding(translated, b.original_src.union(original_src))
                return BindingTable(tuple(entries), self.vpn)
        return BindingTable(tuple(entries) + (NatBinding(translated, original_src),), self.vpn)

    def with_vpn(self, outer: PacketClass, inner: PacketClass) -> BindingTable:
        if any(b.outer == outer and b.inner == inner for b in self.vpn):
            return self
        return BindingTable(self.nat, self.vpn + (VpnBinding(outer, inner),))


NatBindingTable = BindingTable


@dataclass(frozen=True)
class Transfer:
    outcomes: tuple[Outcome, ...]
    bindings: BindingTable = field(default_factory=BindingTable)

    def __iter__(self):
        return iter(self.outcomes)


def reply_class(c: PacketClass) -> PacketClass:
    """The class of replies to ``c``: addresses and ports swapped."""
    return c.with_(src_ip=c.dst_ip, dst_ip=c.src_ip, src_port=c.dst_port, dst_port=c.src_port)


def _split(c: PacketClass, m: PacketClass) -> tuple[PacketClass, list[PacketClass]]:
    return pc_intersect(c, m), pc_subtract(c, m)


def transfer(
    config: VnfConfig,
    klass: PacketClass,
    direction: Direction = Direction.FORWARD_PATH,
    bindings: BindingTable | None = None,
    strict: bool = False,
) -> Transfer:
    if klass.is_empty():
        raise ValueError("transfer input must be non-empty")
    bindings = bindings or BindingTable()
    direction = Direction(direction)

    if isinstance(config, NatConfig):
        if direction is Direction.FORWARD_PATH:
            return _nat_forward(config, klass, bindings)
        return _nat_return(klass, bindings, strict)
    if isinstance(config, AclConfig):
        return Transfer(_acl(config, klass), bindings)
    if isinstance(config, WebCacheConfig):
        web, rest = _split(klass, FULL.with_(app_class=frozenset({"WEB"})))
        out = []
        if web:
            out.append(Outcome(web, ANSWER_LOCALLY, Branch.MAY))
            out.append(Outcome(web, FORWARD, Branch.MAY))
        out.extend(Outcome(r, FORWARD) for r in rest)
        return Transfer(tuple(out), bindings)
    if isinstance(config, AntispamConfig):
        spam, ham = _split(klass, FULL.with_(spam_flag=frozenset({"SPAM"})))
        out = [Outcome(spam, DROP)] if spam else []
        out.extend(Outcome(h, FORWARD) for h in ham)
        return Transfer(tuple(out), bindings)
    if isinstance(config, VpnConfig):
        if direction is Direction.FORWARD_PATH:
            return _vpn_forward(config, klass, bindings)
        return _vpn_return(klass, bindings, strict)
    if isinstance(config, LoadBalancerConfig):
        if not config.backends:
            return Transfer((Outcome(klass, FORWARD),), bindings)
        out = []
        for backend, bucket in zip(config.backends, config.bucket_sets()):
            part = pc_intersect(klass, FULL.with_(src_ip=bucket))
            if part:
                out.append(Outcome(part, Disposition(Action.FORWARD, next_hop=backend)))
        return Transfer(tuple(out), bindings)
    return Transfer((Outcome(klass, FORWARD),), bindings)


def _acl(config: AclConfig, klass: PacketClass) -> tuple[Outcome, ...]:
    out = []
    remaining = [klass]
    for rule in config.rules:
        disp = FORWARD if rule.action == "PERMIT" else DROP
        nxt = []
        for piece in remaining:
            hit, miss = _split(piece, rule.match)
            if hit:
                out.append(Outcome(hit, disp))
            nxt.extend(miss)
        remaining = nxt
        if not remaining:
            break
    default = FORWARD if config.default == "PERMIT" else DROP
    out.extend(Outcome(piece, default) for piece in remaining)
    return tuple(out)


def _nat_forward(config: NatConfig, klass: PacketClass, bindings: BindingTable) -> Transfer:
    inside, outside = _split(klass, FULL.with_(src_ip=config.internal_prefix))
    out = []
    if inside:
        translated = inside.with_(src_ip=IntervalSet.point(config.public_ip))
        bindings = bindings.with_nat(translated, inside.src_ip)
        out.append(Outcome(translated, FORWARD, source=inside, rewrites=frozenset({"src_ip"})))
    out.extend(Outcome(o, FORWARD) for o in outside)
    return Transfer(tuple(out), bindings)


def _nat_return(klass: PacketClass, bindings: BindingTable, strict: bool) -> Transfer:
    out = []
    remaining = [klass]
    # first binding wins where reply patterns overlap (address-only NAT is ambiguous there)
    for b in bindings.nat:
        pattern = reply_class(b.translated)
        nxt = []
        for piece in remaining:
            hit, miss = _split(piece, pattern)
            if hit:
                restored = hit.with_(dst_ip=b.original_src)
                out.append(Outcome(restored, FORWARD, source=hit, rewrites=frozenset({"dst_ip"})))
            nxt.extend(miss)
        remaining = nxt
    if remaining and strict:
        raise UnknownBinding(f"no NAT binding for {remaining[0]!r}")
    out.extend(Outcome(r, DROP) for r in remaining)
    return Transfer(tuple(out), bindings)


def _vpn_forward(config: VpnConfig, klass: PacketClass, bindings: BindingTable) -> Transfer:
    inner, rest = _split(klass, FULL.with_(src_ip=config.inner_prefix))
    out = []
    if inner:
        outer = inner.with_(
            src_ip=IntervalSet.point(config.tunnel_src), dst_ip=IntervalSet.point(config.tunnel_dst)
        )
        bindings = bindings.with_vpn(outer, inner)
        out.append(Outcome(outer, FORWARD, source=inner, rewrites=frozenset({"src_ip", "dst_ip"})))
    out.extend(Outcome(r, FORWARD) for r in rest)
    return Transfer(tuple(out), bindings)


def _vpn_return(klass: PacketClass, bindings: BindingTable, strict: bool) -> Transfer:
    out = []
    remaining = [klass]
    for b in bindings.vpn:
        pattern = reply_class(b.outer)
        nxt = []
        for piece in remaining:
            hit, miss = _split(piece, pattern)
            if hit:
                inner_reply = reply_class(b.inner)
                decap = hit.with_(
                    src_ip=inner_reply.src_ip,
                    dst_ip=inner_reply.dst_ip,
                    src_port=inner_reply.src_port,
                    dst_port=inner_reply.dst_port,
                )
                if decap:
                    out.append(
                        Outcome(
                            decap,
                            FORWARD,
                            source=hit,
                            rewrites=frozenset({"src_ip", "dst_ip", "src_port", "dst_port"}),
                        )
                    )
            nxt.extend(miss)
        remaining = nxt
    if remaining and strict:
        raise UnknownBinding(f"no VPN binding for {remaining[0]!r}")
    out.extend(Outcome(r, DROP) for r in remaining)
    return Transfer(tuple(out), bindings)


def nat_roundtrip(config: NatConfig, klass: PacketClass) -> PacketClass:
    """Forward through the NAT, answer, translate the answer back; returns the original-orientation class."""
    if not klass.src_ip.issubset(config.internal_prefix):
        raise ValueError("roundtrip input must lie inside the NAT internal prefix")
    fwd = transfer(config, klass, Direction.FORWARD_PATH)
    recovered = PacketSet()
    for o in fwd.outcomes:
        back = transfer(config, reply_class(o.klass), Direction.RETURN_PATH, fwd.bindings)
        for r in back.outcomes:
            if r.disposition.action is Action.FORWARD:
                recovered = recovered.union(reply_class(r.klass))
    if len(recovered) == 0:
        return EMPTY
    if len(recovered) == 1:
        return recovered.classes[0]
    # reassemble a cube when the pieces tile one
    hull = _hull(recovered)
    if PacketSet([hull]).equivalent(recovered):
        return hull
    raise ValueError("roundtrip result is not a single class")


def _hull(s: PacketSet) -> PacketClass:
    acc = s.classes[0]
    for c in s.classes[1:]:
        acc = PacketClass(
            **{
                f: (getattr(acc, f) | getattr(c, f))
                if isinstance(getattr(acc, f), frozenset)
                else getattr(acc, f).union(getattr(c, f))
                for f in ("src_ip", "dst_ip", "src_port", "dst_port", "proto", "app_class", "spam_flag")
            }
        )
    return acc
