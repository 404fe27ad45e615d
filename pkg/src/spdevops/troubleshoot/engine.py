"""Run a troubleshooting graph against a simulation and record the diagnosis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..scenario import Simulation
from .expr import ExprTypeError, decision_eval
from .tools import ToolResult, tool_adapter
from .tsg import DecisionNode, SinkNode, ToolNode, Tsg, TsgError


@dataclass
class Diagnosis:
    executed: list[str] = field(default_factory=list)
    branches: dict[str, str] = field(default_factory=dict)  # decision id -> chosen label
    verdict: str | None = None
    sink: str | None = None
    values: dict[str, dict] = field(default_factory=dict)  # tool node id -> ToolResult.values
    log: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "sink": self.sink,
            "executed": self.executed,
            "branches": self.branches,
            "values": self.values,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def trace(self) -> str:
        lines = [f"{i + 1:>2}. {entry}" for i, entry in enumerate(self.log)]
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def bindings(results: dict[str, ToolResult]) -> dict:
    """``node.key`` for every value, plus bare ``key`` where only one node provides it."""
    env: dict = {}
    owners: dict[str, list[str]] = {}
    for node_id, res in results.items():
        for key, value in res.values.items():
            env[f"{node_id}.{key}"] = value
            owners.setdefault(key, []).append(node_id)
    for key, nodes in owners.items():
        if len(nodes) == 1 and key not in env:
            env[key] = results[nodes[0]].values[key]
    return env


def _as_simulation(sim) -> Simulation:
    if isinstance(sim, Simulation):
        return sim
    if isinstance(sim, str):
        return Simulation.loads_snapshot(sim)
    if isinstance(sim, dict):
        return Simulation.restore(sim)
    raise TypeError("run_tsg needs a Simulation, a snapshot dict or snapshot JSON")


def run_tsg(t: Tsg, sim) -> Diagnosis:
    """Execute ``t`` in topological order.

    A node runs when one of its incoming edges is active; an edge is active
    once its source ran and, for decisions, carries the chosen label.
    Snapshots are restored into a fresh simulation so they stay reusable.
    """
    sim = _as_simulation(sim)
    diag = Diagnosis()
    results: dict[str, ToolResult] = {}
    active = {t.entry}
    for node_id in t.order:
        if node_id not in active:
            continue
        node = t.nodes[node_id]
        diag.executed.append(node_id)
        if isinstance(node, ToolNode):
            res = tool_adapter(node.name, node.args, sim, node.positional)
            results[node_id] = res
            diag.values[node_id] = res.values
            diag.log.append(f"{node_id}: {node.name} -> {res.raw}")
            active.update(e.dst for e in t.out_edges(node_id))
        elif isinstance(node, DecisionNode):
            env = bindings(results)
            try:
                label = decision_eval(list(node.guards), env)
            except ExprTypeError as exc:
                raise ExprTypeError(f"decision {node_id}: {exc}") from None
            diag.branches[node_id] = label
            diag.log.append(f"{node_id}: branch {label!r}")
            active.update(e.dst for e in t.out_edges(node_id) if e.label == label)
        elif isinstance(node, SinkNode):
            if diag.sink is not None:
                raise TsgError(f"run reached two sinks: {diag.sink} and {node_id}")
            diag.sink, diag.verdict = node_id, node.verdict
            diag.log.append(f"{node_id}: sink")
    if diag.sink is None:
        raise TsgError("run ended without reaching a sink")
    return diag
