"""Deterministic simulation of the elastic-firewall vCPE lifecycle.

Time advances in aligned windows of ``window`` ticks (10 ms each). Within a
window every firewall port yields one rate sample per tick; at the window
boundary each RateMon emits an estimate, the aggregation point evaluates
the group risk, and triggers flow over the broker to the control app and
from there to the orchestrator, which verifies the candidate graph before
applying any scale operation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli

from . import fixtures
from .nffg import NFFG, NffgError, RejectedUpdate, apply_updates, extract_chains, nffg_from_json, nffg_to_json, validate
from .sdm.aggregation import AggregationSpec, AggregatorState, Combine, Phase, TriggerEvent, aggregate_step
from .sdm.broker import BrokerTree, Scope
from .sdm.monitors import MonitorRegistry
from .sdm.ratemon import RateEstimate, tail_risk
from .verifier import Policy, Verdict, all_hold, verify_policy_set
from .vnf import VnfKind

APPS = ("EMAIL", "WEB", "OTHER")


class ConfigError(ValueError):
    pass


class DeploymentRejected(Exception):
    def __init__(self, verdicts: list[Verdict]):
        self.verdicts = verdicts
        failing = [v.policy_id for v in verdicts if not v.holds or v.error]
        super().__init__(f"initial verification failed for {', '.join(failing)}")


@dataclass
class TrafficModel:
    base_rate: float = 50.0  # Mbit/s per firewall port at the initial instance count
    ramp: float = 2.5  # Mbit/s per second, same scale as base_rate
    noise_sd: float = 2.0
    ramp_duration: float | None = 60.0  # load holds steady afterwards; None ramps throughout


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration: float = 90.0
    tick_ms: int = 10
    window: int = 100
    initial_firewalls: int = 4
    max_firewalls: int = 20
    traffic_model: TrafficModel = field(default_factory=TrafficModel)
    capacity: float = 100.0
    scale_out_risk: float = 0.2
    scale_in_risk: float = 0.01
    sustain: int = 3
    acl: str = "mixed"
    app_shares: dict = field(default_factory=lambda: {"EMAIL": 0.2, "WEB": 0.6, "OTHER": 0.2})
    lb_skew: float | None = None
    control_enabled: bool = True
    second_tenant: bool = True

    def __post_init__(self):
        if isinstance(self.traffic_model, dict):
            self.traffic_model = TrafficModel(**self.traffic_model)
        if not self.scale_in_risk < self.scale_out_risk:
            raise ConfigError("scale_in_risk must be below scale_out_risk")
        if not 1 <= self.initial_firewalls <= self.max_firewalls:
            raise ConfigError("need 1 <= initial_firewalls <= max_firewalls")
        if self.duration < 0 or self.tick_ms <= 0 or self.window < 2 or self.sustain < 1:
            raise ConfigError("duration, tick_ms, window and sustain must be positive")
        if self.capacity <= 0:
            raise ConfigError("capacity must be positive")
        if set(self.app_shares) - set(APPS):
            raise ConfigError(f"app_shares keys must be among {APPS}")

    @classmethod
    def from_dict(cls, raw: dict) -> ScenarioConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, text: str) -> ScenarioConfig:
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"bad scenario file: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        return cls.from_toml(Path(path).read_text(encoding="utf-8"))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def windows(self) -> int:
        return int(round(self.duration * 1000 / self.tick_ms)) // self.window


@dataclass
class EventLedger:
    raw_samples: int = 0
    estimates: int = 0
    local_triggers: int = 0
    central_events: int = 0
    scale_ops: int = 0
    verification_runs: int = 0
    events: list[dict] = field(default_factory=list)

    COUNTERS = ("raw_samples", "estimates", "local_triggers", "central_events", "scale_ops", "verification_runs")

    def log(self, tick: int, kind: str, **detail) -> None:
        self.events.append({"tick": tick, "kind": kind, **detail})

    def counters(self) -> dict:
        return {k: getattr(self, k) for k in self.COUNTERS}

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]


@dataclass
class TimeSeries:
    rows: list[dict] = field(default_factory=list)  # tick, instances, monitors, offered, risk{link: value}

    def instances(self) -> list[int]:
        return [r["instances"] for r in self.rows]

    def links(self) -> list[str]:
        return sorted({k for r in self.rows for k in r["risk"]})


@dataclass(frozen=True)
class ScaleDecision:
    direction: str  # SCALE_OUT | SCALE_IN
    target: int
    weights: tuple[float, ...] | None = None


def control_app_decide(trigger: TriggerEvent, current: int, cfg: ScenarioConfig) -> ScaleDecision | None:
    """Elastic control app: +1 on HIGH below the ceiling, -1 on LOW above one instance."""
    if trigger.level == "HIGH" and current < cfg.max_firewalls:
        target = current + 1
    elif trigger.level == "LOW" and current > 1:
        target = current - 1
    else:
        return None
    weights = fixtures.skew_weights(target, cfg.lb_skew)
    return ScaleDecision("SCALE_OUT" if target > current else "SCALE_IN", target, None if weights is None else tuple(weights))


def decision_buckets(d: ScaleDecision):
    """The src_ip partition a decision programs into the front balancer."""
    return [r.match.src_ip for r in fixtures.lb_rules(d.target, weights=d.weights)]


# --- simulation ---------------------------------------------------------------------------------

TENANT = "tenant_a"
OTHER_TENANT = "tenant_b"
FW_HOST = "node00"  # leaf broker of the firewall host
CTL_HOST = "node01"
ORCH_HOST = "node10"
OPS_HOST = "node11"


class Simulation:
    def __init__(self, cfg: ScenarioConfig, g0: NFFG | None = None, policies: Sequence[Policy] | None = None):
        self.cfg = cfg
        if g0 is None:
            g0 = fixtures.elastic_vcpe_nffg(cfg.acl, cfg.initial_firewalls, cfg.max_firewalls, cfg.lb_skew)
        self.graph = g0
        self.policies = list(fixtures.vcpe_policies(cfg.acl) if policies is None else policies)
        self.rng = np.random.default_rng(cfg.seed)
        self.ledger = EventLedger()
        self.series = TimeSeries()
        self.window_index = 0
        self.injections: list[dict] = []  # {app, delta, start, end} in ticks
        self.history: list[dict] = []  # per window: app loads and instance shares
        self.agg_spec = AggregationSpec(
            ("mf.rate.*",), Combine.MAX, cfg.scale_out_risk, cfg.scale_in_risk, cfg.sustain, action="trigger.fwctl"
        )
        self.agg_state = AggregatorState()
        self.monitors = MonitorRegistry(cfg.capacity, cfg.window)
        self.baseline_verdicts: list[tuple] | None = None
        self._shares_cache: tuple[int, dict] | None = None
        self._chains_cache: tuple[int, list] | None = None
        self.deployed = False
        self._setup_broker()

    # --- wiring -----------------------------------------------------------

    def _setup_broker(self) -> None:
        self.broker = BrokerTree.uniform(2, 2)
        b = self.broker
        b.register("agg.fw", TENANT, FW_HOST)
        b.subscribe("agg.fw", "mf.rate.*", Scope.NODE)
        b.register("ctl.fw", TENANT, CTL_HOST)
        b.subscribe("ctl.fw", "trigger.fwctl.*", Scope.REGION)
        b.register("orchestrator", TENANT, ORCH_HOST)
        b.register("ops", TENANT, OPS_HOST)
        b.subscribe("ops", f"alarm.{TENANT}.*", Scope.GLOBAL)
        if self.cfg.second_tenant:
            b.register("b.mon", OTHER_TENANT, FW_HOST)
            b.register("b.agg", OTHER_TENANT, FW_HOST)
            b.subscribe("b.agg", "mf.rate.*", Scope.GLOBAL)
            b.register("b.ops", OTHER_TENANT, ORCH_HOST)
            b.subscribe("b.ops", "trigger.fwctl.*", Scope.GLOBAL)

    def _firewalls(self) -> list[str]:
        return [fid for _, fid in fixtures.firewall_slots(self.graph)]

    def _attach_monitor(self, node_id: str) -> None:
        handle = self.monitors.deploy(self.graph, node_id)
        client = f"mon.{node_id}"
        if client not in self.broker.clients:
            self.broker.register(client, TENANT, FW_HOST)
        return handle

    def _detach_monitor(self, node_id: str) -> None:
        self.monitors.retire(node_id)
        self.broker.unregister(f"mon.{node_id}")

    @property
    def tick(self) -> int:
        return self.window_index * self.cfg.window

    def shares(self) -> dict[str, float]:
        if self._shares_cache is None or self._shares_cache[0] != id(self.graph):
            self._shares_cache = (id(self.graph), fixtures.instance_shares(self.graph))
        return self._shares_cache[1]

    def chains(self):
        if self._chains_cache is None or self._chains_cache[0] != id(self.graph):
            self._chains_cache = (id(self.graph), extract_chains(self.graph))
        return self._chains_cache[1]

    # --- deployment -----------------------------------------------------------

    def deploy(self) -> list[Verdict]:
        """Pre-deployment verification, then monitors on every firewall."""
        problems = validate(self.graph)
        verdicts = verify_policy_set(self.graph, self.policies)
        self.ledger.verification_runs += 1
        ok = not problems and all_hold(verdicts)
        self.ledger.log(0, "verify", passed=ok, stage="deploy", verdicts=_outcomes(verdicts))
        if not ok:
            raise DeploymentRejected(verdicts)
        self.baseline_verdicts = _outcomes(verdicts)
        for fid in self._firewalls():
            self._attach_monitor(fid)
        self.ledger.log(0, "deploy", instances=len(self._firewalls()))
        self.deployed = True
        return verdicts

    # --- traffic ---------------------------------------------------------------

    def inject(self, delta: float, duration: float, app: str | None = None) -> None:
        """Add ``delta`` Mbit/s of offered load from now for ``duration`` seconds."""
        if app is not None and app not in APPS:
            raise ValueError(f"unknown app class {app!r}")
        ticks = int(round(duration * 1000 / self.cfg.tick_ms))
        self.injections.append({"app": app, "delta": float(delta), "start": self.tick, "end": self.tick + ticks})

    def app_loads(self, ticks: np.ndarray) -> dict[str, np.ndarray]:
        cfg, tm = self.cfg, self.cfg.traffic_model
        secs = ticks * (cfg.tick_ms / 1000.0)
        if tm.ramp_duration is not None:
            secs = np.minimum(secs, tm.ramp_duration)
        total = cfg.initial_firewalls * (tm.base_rate + tm.ramp * secs)
        share_sum = sum(cfg.app_shares.values()) or 1.0
        out = {a: total * cfg.app_shares.get(a, 0.0) / share_sum for a in APPS}
        for inj in self.injections:
            active = (ticks >= inj["start"]) & (ticks < inj["end"])
            if not active.any():
                continue
            if inj["app"] is None:
                for a in APPS:
                    out[a] = out[a] + active * inj["delta"] * cfg.app_shares.get(a, 0.0) / share_sum
            else:
                out[inj["app"]] = out[inj["app"]] + active * inj["delta"]
        return out

    # --- main loop ---------------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        W = cfg.window
        start = self.tick
        ticks = np.arange(start, start + W)
        loads = self.app_loads(ticks)
        total = sum(loads.values())
        shares = self.shares()
        risks: dict[str, float] = {}
        for handle in self.monitors.active():
            mean = total * shares.get(handle.node_id, 0.0)
            for mon in handle.monitors:
                noise = self.rng.normal(0.0, cfg.traffic_model.noise_sd, W)
                est = mon.observe_window(start, np.clip(mean + noise, 0.0, None))
                self.ledger.raw_samples += W
                self.ledger.estimates += 1
                risks[est.link_id] = est.risk
                self.broker.publish(
                    f"mon.{handle.node_id}", handle.topic, json.dumps(est.to_json()).encode(), Scope.NODE
                )
        if cfg.second_tenant:
            # a co-located tenant publishing on the same topic names
            self.broker.publish("b.mon", "mf.rate.fw_1", b'{"risk": 1.0}', Scope.NODE)
        received = self.broker.take("agg.fw")
        self.broker.take("b.agg")
        estimates = [RateEstimate(**json.loads(env.payload)) for env in received]
        self.history.append(
            {"window": self.window_index, "apps": {a: float(v.mean()) for a, v in loads.items()}, "shares": dict(shares)}
        )
        self.series.rows.append(
            {
                "tick": start,
                "instances": len(shares),
                "monitors": self.monitors.monitor_count(),
                "offered": float(total.mean()),
                "risk": risks,
            }
        )
        self.window_index += 1
        boundary = self.tick
        event, self.agg_state = aggregate_step(self.agg_spec, estimates, self.agg_state)
        if event is not None:
            self.ledger.local_triggers += 1
            self.ledger.log(boundary, "trigger", level=event.level, value=round(event.value, 6))
            if self._worth_escalating(event, estimates):
                self.broker.publish("agg.fw", event.topic, json.dumps(event.to_json()).encode(), Scope.REGION)
            else:
                self.ledger.log(boundary, "suppressed", level=event.level)
        for env in self.broker.take("ctl.fw"):
            self._control_app(TriggerEvent(**json.loads(env.payload)), boundary)
        for env in self.broker.take("orchestrator"):
            self._orchestrate(ScaleDecision(**_decision_from_json(json.loads(env.payload))), boundary)

    def _worth_escalating(self, event: TriggerEvent, estimates: list[RateEstimate]) -> bool:
        """Local analytics: release (LOW) only matters if one instance fewer would stay safe."""
        if event.level == "HIGH":
            return True
        n = len(self._firewalls())
        if n <= 1:
            return False
        projected = max(
            (tail_risk(e.mean * n / (n - 1), e.variance, self.cfg.capacity) for e in estimates), default=0.0
        )
        return projected < self.cfg.scale_in_risk

    def _control_app(self, trigger: TriggerEvent, tick: int) -> None:
        if not self.cfg.control_enabled:
            self.ledger.log(tick, "control_idle", level=trigger.level)
            return
        current = len(self._firewalls())
        decision = control_app_decide(trigger, current, self.cfg)
        if decision is None:
            if trigger.level == "HIGH":
                self.ledger.log(tick, "saturated", instances=current)
                self.broker.publish("ctl.fw", f"alarm.{TENANT}.saturation", json.dumps({"instances": current}).encode())
            return
        self.broker.notify("ctl.fw", "orchestrator", "trigger.fwctl.scale", json.dumps(asdict(decision)).encode())

    def _orchestrate(self, decision: ScaleDecision, tick: int) -> None:
        self.ledger.central_events += 1
        weights = None if decision.weights is None else list(decision.weights)
        if decision.direction == "SCALE_OUT":
            updates = fixtures.scale_out_updates(self.graph, weights)
        else:
            updates = fixtures.scale_in_updates(self.graph, weights)
        try:
            candidate = apply_updates(self.graph, updates)
        except (RejectedUpdate, NffgError) as exc:
            self.ledger.log(tick, "rejected", direction=decision.direction, reason=str(exc))
            return
        verdicts = verify_policy_set(candidate, self.policies)
        self.ledger.verification_runs += 1
        ok = all_hold(verdicts)
        self.ledger.log(tick, "verify", passed=ok, stage=decision.direction, verdicts=_outcomes(verdicts))
        if not ok:
            self.ledger.log(tick, "rejected", direction=decision.direction, reason="verification failed")
            return
        before = set(self._firewalls())
        self.graph = candidate
        after = set(self._firewalls())
        for fid in sorted(after - before):
            self._attach_monitor(fid)
        for fid in sorted(before - after):
            self._detach_monitor(fid)
        self.ledger.scale_ops += 1
        self.ledger.log(tick, decision.direction.lower(), instances=len(after), version=candidate.version)

    def run_windows(self, n: int) -> None:
        if not self.deployed:
            self.deploy()
        for _ in range(n):
            self.step()

    def advance(self, seconds: float) -> None:
        ticks = int(round(seconds * 1000 / self.cfg.tick_ms))
        self.run_windows(math.ceil(ticks / self.cfg.window))

    def run(self) -> Simulation:
        self.run_windows(self.cfg.windows - self.window_index)
        return self

    # --- observation helpers for tools ------------------------------------------------

    def link_rate(self, src: str, dst: str, windows: int = 1) -> float:
        """Mean offered rate on the link src->dst over the last ``windows`` windows."""
        recent = self.history[-windows:] if windows > 0 else []
        if not recent:
            return 0.0
        portions = self._link_portions(src, dst)
        rates = []
        for h in recent:
            r = 0.0
            for app, fw, share in portions:
                r += h["apps"][app] * (h["shares"].get(fw, 0.0) if fw else share)
            rates.append(r)
        return sum(rates) / len(rates)

    def _link_portions(self, src: str, dst: str) -> list[tuple[str, str | None, float]]:
        out = []
        for c in self.chains():
            path = c.path
            if not any(a == src and b == dst for a, b in zip(path, path[1:])):
                continue
            apps = {a for k in c.traffic for a in k.app_class}
            fws = [n.id for n in c.nodes if n.kind is VnfKind.ACL_FW]
            for app in sorted(apps):
                out.append((app, fws[0] if fws else None, 1.0))
        return out

    def latest_risk(self, node_id: str) -> float:
        handle = self.monitors.handles.get(node_id)
        if handle is None:
            return 0.0
        vals = [m.last.risk for m in handle.monitors if m.last is not None]
        return max(vals) if vals else 0.0

    def offered_total(self) -> float:
        if not self.history:
            return float(sum(v.mean() for v in self.app_loads(np.array([self.tick])).values()))
        return sum(self.history[-1]["apps"].values())

    # --- snapshots ---------------------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "graph": nffg_to_json(self.graph),
            "policies": [p.to_json() for p in self.policies],
            "window_index": self.window_index,
            "rng": self.rng.bit_generator.state,
            "injections": self.injections,
            "history": self.history,
            "aggregator": {"phase": self.agg_state.phase.value, "count": self.agg_state.count, "windows": self.agg_state.windows},
            "monitors": sorted(self.monitors.handles),
            "last_estimates": {
                m.link_id: m.last.to_json()
                for h in self.monitors.active()
                for m in h.monitors
                if m.last is not None
            },
            "ledger": {**self.ledger.counters(), "events": self.ledger.events},
            "series": self.series.rows,
            "deployed": self.deployed,
            "baseline_verdicts": self.baseline_verdicts,
        }

    @classmethod
    def restore(cls, snap: dict) -> Simulation:
        cfg = ScenarioConfig.from_dict(snap["config"])
        g = nffg_from_json(snap["graph"])
        policies = [Policy.from_json(p, i) for i, p in enumerate(snap["policies"])]
        sim = cls(cfg, g, policies)
        sim.window_index = snap["window_index"]
        sim.rng.bit_generator.state = snap["rng"]
        sim.injections = [dict(i) for i in snap["injections"]]
        sim.history = [dict(h) for h in snap["history"]]
        a = snap["aggregator"]
        sim.agg_state = AggregatorState(Phase(a["phase"]), a["count"], a["windows"])
        for fid in snap["monitors"]:
            sim._attach_monitor(fid)
        for h in sim.monitors.active():
            for m in h.monitors:
                if m.link_id in snap["last_estimates"]:
                    m.last = RateEstimate(**snap["last_estimates"][m.link_id])
        led = snap["ledger"]
        sim.ledger = EventLedger(**{k: led[k] for k in EventLedger.COUNTERS}, events=list(led["events"]))
        sim.series = TimeSeries([dict(r) for r in snap["series"]])
        sim.deployed = snap["deployed"]
        sim.baseline_verdicts = snap["baseline_verdicts"]
        return sim

    def dumps_snapshot(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def loads_snapshot(cls, text: str) -> Simulation:
        return cls.restore(json.loads(text))


def _outcomes(verdicts: Sequence[Verdict]) -> list:
    return [[v.policy_id, v.holds, None if v.cause is None else v.cause.kind] for v in verdicts]


def _decision_from_json(raw: dict) -> dict:
    if raw.get("weights") is not None:
        raw["weights"] = tuple(raw["weights"])
    return raw


def run_scenario(
    cfg: ScenarioConfig, g0: NFFG | None = None, policies: Sequence[Policy] | None = None
) -> tuple[EventLedger, TimeSeries, NFFG]:
    sim = Simulation(cfg, g0, policies)
    sim.deploy()
    sim.run()
    return sim.ledger, sim.series, sim.graph


# --- reports ---------------------------------------------------------------------------------------

REPORT_FILES = ("timeseries.csv", "ledger.csv", "events.csv", "timeseries.dat")


def render_report(ledger: EventLedger, series: TimeSeries) -> dict[str, str]:
    links = series.links()
    ts = io.StringIO()
    w = csv.writer(ts, lineterminator="\n")
    w.writerow(["tick", "instances", "monitors", "offered_mbps"] + [f"risk:{l}" for l in links])
    for r in series.rows:
        w.writerow(
            [r["tick"], r["instances"], r["monitors"], f"{r['offered']:.4f}"]
            + [f"{r['risk'][l]:.6f}" if l in r["risk"] else "" for l in links]
        )

    led = io.StringIO()
    w = csv.writer(led, lineterminator="\n")
    w.writerow(EventLedger.COUNTERS)
    w.writerow([getattr(ledger, k) for k in EventLedger.COUNTERS])

    ev = io.StringIO()
    w = csv.writer(ev, lineterminator="\n")
    w.writerow(["tick", "kind", "detail"])
    for e in ledger.events:
        detail = {k: v for k, v in e.items() if k not in ("tick", "kind")}
        w.writerow([e["tick"], e["kind"], json.dumps(detail, sort_keys=True)])

    dat = ["# tick instances offered_mbps max_risk"]
    for r in series.rows:
        peak = max(r["risk"].values()) if r["risk"] else 0.0
        dat.append(f"{r['tick']} {r['instances']} {r['offered']:.4f} {peak:.6f}")
    return {
        "timeseries.csv": ts.getvalue(),
        "ledger.csv": led.getvalue(),
        "events.csv": ev.getvalue(),
        "timeseries.dat": "\n".join(dat) + "\n",
    }


def export_report(ledger: EventLedger, series: TimeSeries, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in render_report(ledger, series).items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
