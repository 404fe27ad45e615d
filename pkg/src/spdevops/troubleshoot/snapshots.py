"""Scenario snapshots for exercising the elastic-firewall troubleshooting graph."""

from __future__ import annotations

import copy

from ..nffg import nffg_from_json, nffg_to_json
from ..scenario import ScenarioConfig, Simulation, TrafficModel

WARMUP_S = 5.0


def snapshot_config(imbalanced: bool, growing: bool, seed: int = 0) -> ScenarioConfig:
    """Two firewalls at 60 Mbit/s each, steady load.

    ``imbalanced`` steers 90% of the traffic to the first instance;
    ``growing`` leaves the control app on so overload leads to scale-out.
    """
    return ScenarioConfig(
        seed=seed,
        duration=WARMUP_S,
        initial_firewalls=2,
        traffic_model=TrafficModel(base_rate=60.0, ramp=0.0, noise_sd=2.0, ramp_duration=None),
        lb_skew=0.9 if imbalanced else None,
        control_enabled=growing,
    )


def build_snapshot(imbalanced: bool, growing: bool, seed: int = 0) -> dict:
    sim = Simulation(snapshot_config(imbalanced, growing, seed))
    sim.run()
    return sim.snapshot()


def renamed_snapshot(snap: dict, mapping: dict[str, str]) -> dict:
    """Same snapshot with concrete node ids replaced via ``mapping``."""
    m = lambda x: mapping.get(x, x)  # noqa: E731

    def link_id(lid: str) -> str:
        node, _, port = lid.partition(":")
        return f"{m(node)}:{port}"

    out = copy.deepcopy(snap)
    out["graph"] = nffg_to_json(nffg_from_json(snap["graph"]).rename(mapping))
    for p in out["policies"]:
        p["from"], p["to"] = m(p["from"]), m(p["to"])
    out["monitors"] = sorted(m(x) for x in snap["monitors"])
    for h in out["history"]:
        h["shares"] = {m(k): v for k, v in h["shares"].items()}
    out["last_estimates"] = {
        link_id(k): {**v, "link_id": link_id(v["link_id"])} for k, v in snap["last_estimates"].items()
    }
    for row in out["series"]:
        row["risk"] = {link_id(k): v for k, v in row["risk"].items()}
    return out
