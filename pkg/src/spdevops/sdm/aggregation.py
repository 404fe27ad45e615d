"""Aggregation points: combine estimates per window and fire threshold triggers with hysteresis."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .ratemon import RateEstimate


class Combine(str, Enum):
    MAX = "MAX"
    MEAN = "MEAN"
    WEIGHTED_SUM = "WEIGHTED_SUM"


class Phase(str, Enum):
    IDLE = "IDLE"
    ARMED_HIGH = "ARMED_HIGH"
    FIRED = "FIRED"
    ARMED_LOW = "ARMED_LOW"


@dataclass(frozen=True)
class AggregationSpec:
    inputs: tuple[str, ...]  # topic patterns the point subscribes to
    combine: Combine
    threshold_high: float
    threshold_low: float
    sustain: int = 1
    action: str = "trigger.app.event"
    weights: tuple[float, ...] = ()
    metric: str = "risk"

    def __post_init__(self):
        object.__setattr__(self, "combine", Combine(self.combine))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "weights", tuple(self.weights))
        if self.threshold_low > self.threshold_high:
            raise ValueError("threshold_low must not exceed threshold_high")
        if self.sustain < 1:
            raise ValueError("sustain must be >= 1")


@dataclass(frozen=True)
class AggregatorState:
    phase: Phase = Phase.IDLE
    count: int = 0
    windows: int = 0


@dataclass(frozen=True)
class TriggerEvent:
    level: str  # HIGH | LOW
    value: float
    window: int
    topic: str

    def to_json(self) -> dict:
        return {"level": self.level, "value": self.value, "window": self.window, "topic": self.topic}


def combine_values(spec: AggregationSpec, values: Sequence[float]) -> float:
    if not values:
        return 0.0
    if spec.combine is Combine.MAX:
        return max(values)
    if spec.combine is Combine.MEAN:
        return sum(values) / len(values)
    weights = spec.weights or (1.0,) * len(values)
    if len(weights) != len(values):
        raise ValueError(f"{len(weights)} weights for {len(values)} inputs")
    return sum(w * v for w, v in zip(weights, values))


def aggregate_value(spec: AggregationSpec, value: float, state: AggregatorState) -> tuple[TriggerEvent | None, AggregatorState]:
    """Advance the trigger state machine by one window with an already combined value.

    HIGH fires after ``sustain`` consecutive windows above threshold_high.
    Once fired, LOW fires after ``sustain`` consecutive windows below
    threshold_low and re-arms the point; HIGH cannot fire again before that.
    """
    w = state.windows
    nxt = w + 1
    phase, count = state.phase, state.count
    if phase in (Phase.IDLE, Phase.ARMED_HIGH):
        if value > spec.threshold_high:
            count += 1
            if count >= spec.sustain:
                return TriggerEvent("HIGH", value, w, spec.action + ".high"), AggregatorState(Phase.FIRED, 0, nxt)
            return None, AggregatorState(Phase.ARMED_HIGH, count, nxt)
        return None, AggregatorState(Phase.IDLE, 0, nxt)
    if value < spec.threshold_low:
        count += 1
        if count >= spec.sustain:
            return TriggerEvent("LOW", value, w, spec.action + ".low"), AggregatorState(Phase.IDLE, 0, nxt)
        return None, AggregatorState(Phase.ARMED_LOW, count, nxt)
    return None, AggregatorState(Phase.FIRED, 0, nxt)


def aggregate_step(
    spec: AggregationSpec, estimates: Sequence[RateEstimate], state: AggregatorState
) -> tuple[TriggerEvent | None, AggregatorState]:
    values = [getattr(e, spec.metric) for e in sorted(estimates, key=lambda e: e.link_id)]
    return aggregate_value(spec, combine_values(spec, values), state)
