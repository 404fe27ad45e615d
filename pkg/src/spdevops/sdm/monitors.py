"""Automatic placement of rate monitors on VNF ports."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..nffg import NFFG
from ..vnf import VnfKind
from .ratemon import DEFAULT_WINDOW, RateMon


class UnknownNode(KeyError):
    pass


@dataclass
class MonitorHandle:
    node_id: str
    topic: str
    monitors: list[RateMon] = field(default_factory=list)
    active: bool = True


class MonitorRegistry:
    """Tracks which nodes carry RateMon observability points."""

    def __init__(self, capacity: float = 100.0, window_size: int = DEFAULT_WINDOW):
        self.capacity = capacity
        self.window_size = window_size
        self.handles: dict[str, MonitorHandle] = {}

    def deploy(self, g: NFFG, node_id: str) -> MonitorHandle:
        if not g.has_node(node_id):
            raise UnknownNode(node_id)
        node = g.node(node_id)
        if node.kind is VnfKind.ENDPOINT:
            raise UnknownNode(f"{node_id} is an endpoint, not a monitorable VNF")
        handle = self.handles.get(node_id)
        if handle is not None and handle.active:
            return handle
        handle = MonitorHandle(
            node_id,
            f"mf.rate.{node_id}",
            [RateMon(f"{node_id}:{p}", self.capacity, self.window_size) for p in node.ports],
        )
        self.handles[node_id] = handle
        return handle

    def retire(self, node_id: str) -> MonitorHandle | None:
        handle = self.handles.pop(node_id, None)
        if handle is not None:
            handle.active = False
        return handle

    def active(self) -> list[MonitorHandle]:
        return [self.handles[k] for k in sorted(self.handles)]

    def monitor_count(self) -> int:
        return sum(len(h.monitors) for h in self.handles.values())


def deploy_monitor(g: NFFG, node_id: str, registry: MonitorRegistry) -> MonitorHandle:
    return registry.deploy(g, node_id)
