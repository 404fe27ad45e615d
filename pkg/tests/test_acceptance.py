"""End-to-end acceptance criteria; each test reports one PASS/FAIL line."""

import random
import statistics
import time

import numpy as np

from helpers import DATA
from spdevops import fixtures
from spdevops.cli import EXIT_OK, main
from spdevops.nffg import extract_chains
from spdevops.opex import IncidentModel, opex_savings
from spdevops.oracle import oracle_reachability
from spdevops.packets import PacketSet
from spdevops.scenario import ScenarioConfig, Simulation
from spdevops.sdm import RateMon, tail_risk
from spdevops.troubleshoot import build_snapshot, elastic_firewall_tsg, run_tsg
from spdevops.troubleshoot.tsg import ELASTIC_FIREWALL_PATH
from spdevops.verifier import Cause, Policy, PolicyKind, check_isolation, check_reachability, propagate, verify_policy_set

REACH, ISOLATE = PolicyKind.REACHABILITY, PolicyKind.ISOLATION
N_FIXTURES = 500

# reference per-check latencies the latency criterion compares against, in ms
REFERENCE_REACH_MS, REFERENCE_ISOLATION_MS = 200.0, 310.0


def _fixture_verdicts():
    rows = []
    for i in range(N_FIXTURES):
        g, p = fixtures.random_fixture(random.Random(i), i)
        r = check_reachability(g, Policy(REACH, p.src, p.dst, p.traffic))
        iso = check_isolation(g, Policy(ISOLATE, p.src, p.dst, p.traffic))
        rows.append((r.holds, iso.holds, oracle_reachability(g, p)))
    return rows


_CACHE: dict = {}


def fixture_verdicts():
    if "rows" not in _CACHE:
        t0 = time.perf_counter()
        _CACHE["rows"] = _fixture_verdicts()
        _CACHE["seconds"] = time.perf_counter() - t0
    return _CACHE["rows"], _CACHE["seconds"]


def test_01_oracle_equivalence(acceptance_report):
    rows, seconds = fixture_verdicts()
    mismatches = sum((r != o) + (iso != (not o)) for r, iso, o in rows)
    ok = len(rows) >= 500 and mismatches == 0 and seconds < 60
    acceptance_report(1, "symbolic verdicts match the enumeration oracle", ok,
                      f"{len(rows)} fixtures, {mismatches} mismatches, {seconds:.1f} s")
    assert ok


def test_02_complement_law(acceptance_report):
    rows, _ = fixture_verdicts()
    violations = sum(iso == r for r, iso, _ in rows)
    acceptance_report(2, "isolation is the complement of reachability", violations == 0,
                      f"{len(rows)} fixtures, {violations} violations")
    assert violations == 0


def test_03_vcpe_chains_and_root_cause(acceptance_report):
    g = fixtures.vcpe_nffg("block")
    chains = extract_chains(g)
    kinds = [[n.kind.value for n in c.middle] for c in chains]
    verdicts = verify_policy_set(g, fixtures.vcpe_policies("block"))
    causes = {v.policy_id: v.cause for v in verdicts}
    # the traffic of the chains through anti-spam and cache does reach the firewall
    reached = []
    for c in chains[:2]:
        p = next(p for p in fixtures.vcpe_policies("block") if p.dst == c.server)
        i = next(i for i, n in enumerate(c.nodes) if n.kind.value == "ACL_FW")
        reached.append(bool(propagate(g, c, PacketSet([p.traffic]), stop=i + 1)[i]))
    ok = (
        kinds == [["ANTISPAM", "ACL_FW", "NAT"], ["WEB_CACHE", "ACL_FW", "NAT"], ["ACL_FW", "NAT"]]
        and all(v.holds for v in verdicts)
        and set(causes.values()) == {Cause("fw", "ACL_FW")}
        and all(v.prefix_checks >= 1 for v in verdicts)
        and all(reached)
    )
    acceptance_report(3, "three vCPE chains, isolation blamed on the ACL", ok,
                      f"{len(chains)} chains, causes {sorted({c.kind for c in causes.values()})}")
    assert ok


def test_04_verification_latency(acceptance_report):
    g = fixtures.vcpe_nffg("mixed")
    ps = fixtures.vcpe_policies("mixed")
    reach, iso = [], []
    for _ in range(100):
        for v in verify_policy_set(g, ps):
            (reach if v.kind is REACH else iso).append(v.elapsed_ms)
    med_r, med_i = statistics.median(reach), statistics.median(iso)
    max_r, max_i = max(reach), max(iso)
    ok = med_r < 50 and med_i < 80 and max_r < 10 * REFERENCE_REACH_MS and max_i < 10 * REFERENCE_ISOLATION_MS
    acceptance_report(
        4, "verification latency", ok,
        f"reachability median {med_r:.2f} ms max {max_r:.2f} ms vs {REFERENCE_REACH_MS:.0f} ms; "
        f"isolation+root cause median {med_i:.2f} ms max {max_i:.2f} ms vs {REFERENCE_ISOLATION_MS:.0f} ms",
    )
    assert ok


def _run(cfg: ScenarioConfig) -> Simulation:
    sim = Simulation(cfg)
    sim.deploy()
    return sim.run()


def test_05_sdm_reduction(acceptance_report):
    flat = _run(ScenarioConfig.load(DATA / "flat.toml")).ledger
    ramp = _run(ScenarioConfig.load(DATA / "ramp.toml")).ledger
    ratio = ramp.raw_samples / max(ramp.central_events, 1)
    ok = (
        (flat.raw_samples, flat.estimates, flat.central_events) == (240_000, 2_400, 0)
        and ramp.central_events == ramp.scale_ops > 0
        and ratio >= 1e4
    )
    acceptance_report(5, "monitoring data reduction", ok,
                      f"flat {flat.raw_samples}/{flat.estimates}/{flat.central_events}; "
                      f"ramp central {ramp.central_events} == scale ops {ramp.scale_ops}, ratio {ratio:.0f}")
    assert ok


def test_06_closed_loop_elasticity(acceptance_report):
    problems = []
    finals = []
    for seed in range(10):
        cfg = ScenarioConfig.load(DATA / "ramp.toml")
        cfg.seed = seed
        sim = _run(cfg)
        inst = sim.series.instances()
        events = sim.ledger.events
        ops = [e for e in events if e["kind"] in ("scale_out", "scale_in")]
        if any(a > b for a, b in zip(inst, inst[1:])):
            problems.append(f"seed {seed}: instance count decreased")
        if any(e["kind"] == "scale_in" for e in ops):
            problems.append(f"seed {seed}: scale-in during a ramp")
        hold = inst[int(cfg.traffic_model.ramp_duration * 1000 / cfg.tick_ms / cfg.window) + cfg.sustain + 2 :]
        if len(set(hold)) != 1 or inst[-1] <= inst[0]:
            problems.append(f"seed {seed}: no plateau")
        for e in ops:
            prev = events[events.index(e) - 1]
            if not (prev["kind"] == "verify" and prev["passed"] and prev["tick"] == e["tick"]):
                problems.append(f"seed {seed}: unverified update at tick {e['tick']}")
        for e in sim.ledger.of_kind("verify"):
            if e["verdicts"] != sim.baseline_verdicts:
                problems.append(f"seed {seed}: verdicts changed at tick {e['tick']}")
        finals.append(inst[-1])
    ok = not problems
    acceptance_report(6, "closed-loop elasticity", ok,
                      f"10 seeds, plateaus {sorted(set(finals))}" + (f"; {problems[0]}" if problems else ""))
    assert ok, problems


def test_07_ratemon_statistics(acceptance_report):
    analytic = 0.02275
    rng = np.random.default_rng(2024)
    mon = RateMon("synthetic", capacity=100)
    risks = [mon.observe_window(w * 100, rng.normal(80, 10, 100)).risk for w in range(1000)]
    estimated = float(np.mean(risks))
    monte_carlo = float((np.random.default_rng(7).normal(80, 10, 10**6) > 100).mean())
    grid = [tail_risk(80, 100, c) for c in (90, 100, 110, 120)]
    ok = (
        abs(estimated - analytic) <= 0.005
        and abs(monte_carlo - analytic) <= 0.005
        and all(a >= b for a, b in zip(grid, grid[1:]))
    )
    acceptance_report(7, "rate monitor risk estimate", ok,
                      f"mean risk {estimated:.5f} over {len(risks)} windows, Monte Carlo {monte_carlo:.5f}, "
                      f"analytic {analytic}")
    assert ok


def test_08_broker_locality(acceptance_report):
    cfg = ScenarioConfig.load(DATA / "ramp.toml")
    rep = _run(cfg).broker.locality_report()
    ok = (
        rep["same_leaf"] > 0
        and rep["same_leaf_parent_links_zero"]
        and rep["cross_broker"] > 0
        and rep["lca_traversed_once"]
        and rep["cross_tenant_deliveries"] == 0
    )
    acceptance_report(8, "broker locality and tenant isolation", ok,
                      f"{rep['same_leaf']} same-leaf, {rep['cross_broker']} cross-broker, "
                      f"{rep['cross_tenant_deliveries']} cross-tenant deliveries")
    assert ok


def test_09_troubleshooting_graph(acceptance_report):
    expected = {
        (False, False): "debug ControlApp",
        (False, True): "hypothesis rejected",
        (True, False): "debug LoadBalancer",
        (True, True): "debug LoadBalancer",
    }
    t0 = time.perf_counter()
    t = elastic_firewall_tsg()
    got = {k: run_tsg(t, build_snapshot(*k)).verdict for k in expected}
    seconds = time.perf_counter() - t0
    ok = got == expected and seconds < 5
    acceptance_report(9, "troubleshooting graph verdicts", ok,
                      f"{sum(got[k] == v for k, v in expected.items())}/4 correct in {seconds:.2f} s")
    assert ok


def test_10_opex_band(acceptance_report):
    m = IncidentModel.load(DATA / "incident_model.json")
    opt = opex_savings(m, "optimistic").overall_addressable
    con = opex_savings(m, "conservative").overall_addressable
    zero = opex_savings(m, 0.0).overall_addressable
    eps = 1e-9  # float round-off only; the ratio of sums lands a few ulps off 0.8
    ok = 0.70 - eps <= opt <= 0.80 + eps and abs(con - 0.30) < eps and zero == 0.0
    acceptance_report(10, "OPEX savings band", ok, f"optimistic {opt:.3f}, conservative {con:.3f}, zero {zero:.3f}")
    assert ok


def test_11_cli_determinism(acceptance_report, tmp_path):
    vcpe, policies = str(DATA / "vcpe.nffg.json"), str(DATA / "policies.json")
    commands = {
        "run": ["run", str(DATA / "ramp.toml"), "--seed", "5", "--snapshot"],
        "verify": ["verify", vcpe, policies],
        "extract": ["extract", vcpe],
        "oracle": ["oracle", vcpe, policies],
        "opex": ["opex", "--scenario", "conservative"],
        "troubleshoot": ["troubleshoot", str(ELASTIC_FIREWALL_PATH), "--imbalanced"],
    }
    differing = []
    files = 0
    for name, argv in commands.items():
        outs = []
        for attempt in ("a", "b"):
            d = tmp_path / name / attempt
            assert main(argv + ["--out", str(d)]) == EXIT_OK
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        files += len(outs[0])
        if outs[0] != outs[1] or not outs[0]:
            differing.append(name)
    snaps = []
    for attempt in ("a", "b"):
        p = tmp_path / f"snap_{attempt}.json"
        assert main(["snapshot", "--growing", "--seed", "3", "-o", str(p)]) == EXIT_OK
        snaps.append(p.read_bytes())
    if snaps[0] != snaps[1]:
        differing.append("snapshot")
    ok = not differing
    acceptance_report(11, "byte-identical CLI reports", ok,
                      f"{len(commands) + 1} commands, {files + 1} files" + (f", differing: {differing}" if differing else ""))
    assert ok
