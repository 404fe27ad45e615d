"""JSON-in, JSON-out operations shared by the HTTP API and the local CLI."""

from __future__ import annotations

from . import nffg as nffg_io
from .nffg import extract_chains, validate
from .opex import IncidentModel, opex_savings
from .oracle import oracle_reachability
from .scenario import ScenarioConfig, Simulation, render_report
from .troubleshoot import build_snapshot, parse_tsg, run_tsg
from .verifier import Policy, PolicyKind, all_hold, timing_summary, verify_policy_set


def _policies(raw: list[dict]) -> list[Policy]:
    return [Policy.from_json(r, i) for i, r in enumerate(raw)]


def verify(nffg: dict, policies: list[dict], root_cause: bool = True) -> dict:
    g = nffg_io.nffg_from_json(nffg)
    verdicts = verify_policy_set(g, _policies(policies), root_cause=root_cause)
    return {
        "all_hold": all_hold(verdicts),
        "verdicts": [v.to_json() for v in verdicts],
        "timing": timing_summary(verdicts),
    }


def extract(nffg: dict) -> dict:
    g = nffg_io.nffg_from_json(nffg)
    problems = validate(g)
    if problems:
        return {"valid": False, "violations": [str(p) for p in problems], "chains": []}
    chains = extract_chains(g)
    return {
        "valid": True,
        "violations": [],
        "chains": [
            {
                "index": i + 1,
                "client": c.client,
                "server": c.server,
                "path": list(c.path),
                "kinds": [n.kind.value for n in c.nodes],
                "traffic": [k.to_match() for k in c.traffic],
            }
            for i, c in enumerate(chains)
        ],
    }


def oracle_check(nffg: dict, policies: list[dict], bits: int = 8) -> dict:
    """Symbolic verdicts next to brute-force enumeration over a reduced header domain."""
    g = nffg_io.nffg_from_json(nffg)
    ps = _policies(policies)
    verdicts = verify_policy_set(g, ps, root_cause=False)
    rows = []
    for p, v in zip(ps, verdicts):
        reach = oracle_reachability(g, p, bits)
        expected = reach if p.kind is PolicyKind.REACHABILITY else not reach
        rows.append({"policy_id": p.id, "kind": p.kind.value, "symbolic": v.holds, "oracle": expected, "agree": v.holds == expected})
    return {"bits": bits, "agree": all(r["agree"] for r in rows), "results": rows}


def opex(model: dict | None = None, scenario: str | float = "optimistic") -> dict:
    m = IncidentModel() if model is None else IncidentModel.from_json(model)
    report = opex_savings(m, scenario)
    return {**report.to_json(), "text": report.text()}


def run_scenario(config: dict, seed: int | None = None, snapshot: bool = False) -> dict:
    cfg = ScenarioConfig.from_dict({**config, **({} if seed is None else {"seed": seed})})
    sim = Simulation(cfg)
    sim.deploy()
    sim.run()
    out = {
        "config": cfg.to_dict(),
        "counters": sim.ledger.counters(),
        "instances": sim.series.instances(),
        "reports": render_report(sim.ledger, sim.series),
    }
    if snapshot:
        out["snapshot"] = sim.snapshot()
    return out


def troubleshoot(
    tsg: str, snapshot: dict | None = None, imbalanced: bool = False, growing: bool = False, seed: int = 0
) -> dict:
    t = parse_tsg(tsg)
    snap = snapshot if snapshot is not None else build_snapshot(imbalanced, growing, seed)
    diag = run_tsg(t, snap)
    return {**diag.to_json(), "trace": diag.trace()}
