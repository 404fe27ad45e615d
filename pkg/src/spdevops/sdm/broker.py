"""Hierarchical multi-tenant pub/sub broker (node / region / root levels).

Messages climb the tree only as far as needed: a publish reaches a
subscriber through their lowest common broker, bounded by the scope the
publisher declared and the scope the subscriber asked for.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum


class Scope(IntEnum):
    NODE = 0
    REGION = 1
    GLOBAL = 2


class EnvelopeKind(str, Enum):
    PUBLISH = "PUBLISH"
    NOTIFY = "NOTIFY"


class UnknownClient(KeyError):
    pass


@dataclass(frozen=True)
class Envelope:
    tenant: str
    topic: str
    sender: str
    payload: bytes = b""
    scope: Scope = Scope.GLOBAL
    kind: EnvelopeKind = EnvelopeKind.PUBLISH
    target: str | None = None
    hop_trace: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scope", Scope(self.scope))
        object.__setattr__(self, "kind", EnvelopeKind(self.kind))
        if self.kind is EnvelopeKind.NOTIFY and not self.target:
            raise ValueError("NOTIFY needs exactly one target")

    @property
    def parent_links(self) -> int:
        return max(0, len(self.hop_trace) - 1)


@dataclass(frozen=True)
class Delivery:
    client: str
    envelope: Envelope


@dataclass
class _Client:
    id: str
    tenant: str
    broker: str


@dataclass
class _Subscription:
    client: str
    pattern: tuple[str, ...]
    scope: Scope


def topic_matches(pattern: str | tuple[str, ...], topic: str) -> bool:
    """Dot-separated match; ``*`` matches exactly one segment."""
    pat = pattern.split(".") if isinstance(pattern, str) else pattern
    parts = topic.split(".")
    return len(pat) == len(parts) and all(p == "*" or p == t for p, t in zip(pat, parts))


@dataclass
class BrokerTree:
    regions: dict[str, list[str]]  # region broker -> leaf brokers
    root: str = "root"
    clients: dict[str, _Client] = field(default_factory=dict)
    subscriptions: dict[str, list[_Subscription]] = field(default_factory=dict)  # tenant -> subs
    delivered: list[Delivery] = field(default_factory=list)
    dead_letters: Counter = field(default_factory=Counter)
    keep_log: bool = True
    sent: int = 0
    inboxes: dict[str, list[Envelope]] = field(default_factory=dict)

    def __post_init__(self):
        self.parent: dict[str, str | None] = {self.root: None}
        self.level: dict[str, int] = {self.root: 2}
        for region, leaves in self.regions.items():
            if region in self.parent:
                raise ValueError(f"duplicate broker {region!r}")
            self.parent[region] = self.root
            self.level[region] = 1
            for leaf in leaves:
                if leaf in self.parent:
                    raise ValueError(f"duplicate broker {leaf!r}")
                self.parent[leaf] = region
                self.level[leaf] = 0

    @classmethod
    def uniform(cls, regions: int = 2, leaves_per_region: int = 2) -> BrokerTree:
        return cls({f"region{r}": [f"node{r}{i}" for i in range(leaves_per_region)] for r in range(regions)})

    @property
    def brokers(self) -> list[str]:
        return list(self.parent)

    @property
    def leaves(self) -> list[str]:
        return [b for b, lvl in self.level.items() if lvl == 0]

    # registration ------------------------------------------------------------------

    def register(self, client: str, tenant: str, broker: str) -> None:
        if broker not in self.parent:
            raise KeyError(f"unknown broker {broker!r}")
        known = self.clients.get(client)
        if known is not None and (known.tenant, known.broker) != (tenant, broker):
            raise ValueError(f"client {client!r} already attached to {known.broker}")
        self.clients[client] = _Client(client, tenant, broker)

    def unregister(self, client: str) -> None:
        c = self.clients.pop(client, None)
        self.inboxes.pop(client, None)
        if c is not None:
            subs = self.subscriptions.get(c.tenant, [])
            self.subscriptions[c.tenant] = [s for s in subs if s.client != client]

    def subscribe(self, client: str, pattern: str, scope: Scope = Scope.GLOBAL) -> None:
        c = self._client(client)
        subs = self.subscriptions.setdefault(c.tenant, [])
        pat = tuple(pattern.split("."))
        if not any(s.client == client and s.pattern == pat for s in subs):
            subs.append(_Subscription(client, pat, Scope(scope)))

    def unsubscribe(self, client: str, pattern: str) -> None:
        c = self._client(client)
        pat = tuple(pattern.split("."))
        self.subscriptions[c.tenant] = [
            s for s in self.subscriptions.get(c.tenant, []) if not (s.client == client and s.pattern == pat)
        ]

    def _client(self, client: str) -> _Client:
        try:
            return self.clients[client]
        except KeyError:
            raise UnknownClient(client) from None

    # tree geometry ---------------------------------------------------------------------

    def up_path(self, broker: str) -> list[str]:
        path = [broker]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path

    def lca(self, a: str, b: str) -> str:
        ancestors = set(self.up_path(a))
        for x in self.up_path(b):
            if x in ancestors:
                return x
        raise ValueError("brokers are not in one tree")

    def tree_path(self, a: str, b: str) -> tuple[str, ...]:
        top = self.lca(a, b)
        up = self.up_path(a)
        up = up[: up.index(top) + 1]
        down = self.up_path(b)
        down = down[: down.index(top)]
        return tuple(up) + tuple(reversed(down))

    def _reach(self, broker: str, scope: Scope) -> int:
        """Highest tree level a message may climb to from ``broker`` under ``scope``."""
        return max(self.level[broker], int(scope))

    # routing ------------------------------------------------------------------------------

    def route(self, env: Envelope) -> list[Delivery]:
        sender = self._client(env.sender)
        if sender.tenant != env.tenant:
            raise ValueError(f"{env.sender} cannot publish as tenant {env.tenant!r}")
        self.sent += 1
        if env.kind is EnvelopeKind.NOTIFY:
            target = self.clients.get(env.target)
            if target is None or target.tenant != env.tenant:
                self.dead_letters[env.topic] += 1
                return []
            out = [Delivery(target.id, replace(env, hop_trace=self.tree_path(sender.broker, target.broker)))]
        else:
            out = []
            reach = self._reach(sender.broker, env.scope)
            seen = set()
            for sub in sorted(self.subscriptions.get(env.tenant, []), key=lambda s: s.client):
                if sub.client in seen or not topic_matches(sub.pattern, env.topic):
                    continue
                target = self.clients[sub.client]
                top = self.lca(sender.broker, target.broker)
                if self.level[top] > reach or self.level[top] > self._reach(target.broker, sub.scope):
                    continue
                seen.add(sub.client)
                out.append(Delivery(sub.client, replace(env, hop_trace=self.tree_path(sender.broker, target.broker))))
        for d in out:
            self.inboxes.setdefault(d.client, []).append(d.envelope)
        if self.keep_log:
            self.delivered.extend(out)
        return out

    def take(self, client: str) -> list[Envelope]:
        """Pop everything queued for ``client`` in delivery order."""
        return self.inboxes.pop(client, [])

    def publish(self, sender: str, topic: str, payload: bytes = b"", scope: Scope = Scope.GLOBAL) -> list[Delivery]:
        c = self._client(sender)
        return self.route(Envelope(c.tenant, topic, sender, payload, scope))

    def notify(self, sender: str, target: str, topic: str, payload: bytes = b"") -> list[Delivery]:
        c = self._client(sender)
        return self.route(Envelope(c.tenant, topic, sender, payload, kind=EnvelopeKind.NOTIFY, target=target))

    def locality_report(self) -> dict:
        """Locality and isolation statistics over the delivery log."""
        same_leaf = cross = 0
        same_leaf_ok = lca_once_ok = True
        cross_tenant = 0
        for d in self.delivered:
            env = d.envelope
            src = self.clients[env.sender].broker if env.sender in self.clients else env.hop_trace[0]
            dst = env.hop_trace[-1]
            if self.clients.get(d.client) is not None and self.clients[d.client].tenant != env.tenant:
                cross_tenant += 1
            if src == dst and self.level[src] == 0:
                same_leaf += 1
                same_leaf_ok &= env.parent_links == 0
            elif src != dst:
                cross += 1
                lca_once_ok &= env.hop_trace.count(self.lca(src, dst)) == 1
        return {
            "deliveries": len(self.delivered),
            "same_leaf": same_leaf,
            "same_leaf_parent_links_zero": same_leaf_ok,
            "cross_broker": cross,
            "lca_traversed_once": lca_once_ok,
            "cross_tenant_deliveries": cross_tenant,
            "dead_letters": sum(self.dead_letters.values()),
        }


def broker_route(tree: BrokerTree, env: Envelope) -> list[tuple[str, Envelope]]:
    return [(d.client, d.envelope) for d in tree.route(env)]
