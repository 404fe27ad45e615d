"""Windowed rate estimation with a Gaussian congestion-risk model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

DEFAULT_WINDOW = 100
TICK_MS = 10


class ShortWindow(ValueError):
    pass


@dataclass(frozen=True)
class RateSample:
    link_id: str
    timestamp: int  # ticks
    rate: float  # Mbit/s


@dataclass(frozen=True)
class RateEstimate:
    link_id: str
    window_start: int
    window_end: int
    mean: float
    variance: float
    risk: float
    n: int

    def to_json(self) -> dict:
        return asdict(self)


def tail_risk(mean: float, variance: float, capacity: float) -> float:
    """P(X > capacity) for X ~ Normal(mean, variance)."""
    if variance <= 0.0:
        return 1.0 if mean > capacity else 0.0
    z = (capacity - mean) / math.sqrt(2.0 * variance)
    return min(1.0, max(0.0, 0.5 * math.erfc(z)))


def estimate(
    link_id: str, window_start: int, values: Sequence[float] | np.ndarray, capacity: float
) -> RateEstimate:
    """Estimate from raw values of one window (ticks ``window_start`` onward)."""
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 2:
        raise ShortWindow(f"need at least 2 samples, got {n}")
    mean = float(arr.mean())
    var = float(arr.var(ddof=1))
    return RateEstimate(link_id, window_start, window_start + n - 1, mean, var, tail_risk(mean, var, capacity), n)


def ratemon_update(window: Sequence[RateSample], capacity: float, window_size: int = DEFAULT_WINDOW) -> RateEstimate:
    if len(window) != window_size:
        raise ShortWindow(f"window holds {len(window)} samples, expected {window_size}")
    links = {s.link_id for s in window}
    if len(links) != 1:
        raise ValueError(f"window mixes links {sorted(links)}")
    for a, b in zip(window, window[1:]):
        if b.timestamp <= a.timestamp:
            raise ValueError("sample timestamps must be strictly increasing")
    return RateEstimate(
        **{
            **asdict(estimate(window[0].link_id, window[0].timestamp, [s.rate for s in window], capacity)),
            "window_end": window[-1].timestamp,
        }
    )


class RateMon:
    """Observability point on one port: buffers samples, emits one estimate per full window."""

    def __init__(self, link_id: str, capacity: float, window_size: int = DEFAULT_WINDOW):
        if window_size < 2:
            raise ValueError("window_size must be >= 2")
        self.link_id = link_id
        self.capacity = capacity
        self.window_size = window_size
        self.samples_seen = 0
        self.estimates_emitted = 0
        self.last: RateEstimate | None = None
        self._buf: list[RateSample] = []
        self._last_ts: int | None = None

    def observe(self, timestamp: int, rate: float) -> RateEstimate | None:
        if self._last_ts is not None and timestamp <= self._last_ts:
            raise ValueError("sample timestamps must be strictly increasing")
        self._last_ts = timestamp
        self._buf.append(RateSample(self.link_id, timestamp, max(0.0, float(rate))))
        self.samples_seen += 1
        if len(self._buf) < self.window_size:
            return None
        est = ratemon_update(self._buf, self.capacity, self.window_size)
        self._buf = []
        return self._emit(est)

    def observe_window(self, start: int, rates: np.ndarray) -> RateEstimate:
        """Fast path for a whole aligned window of samples at consecutive ticks."""
        if self._buf:
            raise ValueError("cannot mix per-sample and per-window observation")
        if len(rates) != self.window_size:
            raise ShortWindow(f"window holds {len(rates)} samples, expected {self.window_size}")
        if self._last_ts is not None and start <= self._last_ts:
            raise ValueError("sample timestamps must be strictly increasing")
        self._last_ts = start + len(rates) - 1
        self.samples_seen += len(rates)
        return self._emit(estimate(self.link_id, start, rates, self.capacity))

    def _emit(self, est: RateEstimate) -> RateEstimate:
        self.estimates_emitted += 1
        self.last = est
        return est
