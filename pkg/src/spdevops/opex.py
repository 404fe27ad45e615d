"""Impact-weighted OPEX savings over incident categories.

Impact of a category is its incident share times its mean duration. An
addressable category loses ``scenario_fraction`` of its impact: verification
avoids incidents outright, monitoring and troubleshooting shorten them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class InvalidModel(ValueError):
    pass


class Process(str, Enum):
    VERIFICATION = "VERIFICATION"
    MONITORING = "MONITORING"
    TROUBLESHOOTING = "TROUBLESHOOTING"


class Scenario(str, Enum):
    CONSERVATIVE = "conservative"
    OPTIMISTIC = "optimistic"


@dataclass(frozen=True)
class IncidentCategory:
    name: str
    share: float
    mean_duration: float = 1.0  # hours
    addressable_by: frozenset = frozenset()

    @property
    def addressable(self) -> bool:
        return bool(self.addressable_by)


_ALL = frozenset(Process)
_SHORTEN = frozenset({Process.MONITORING, Process.TROUBLESHOOTING})

# Durations are uniform placeholders; only their ratios matter.
DEFAULT_CATEGORIES = (
    IncidentCategory("software bugs", 0.44, 1.0, _ALL),
    IncidentCategory("network overload", 0.19, 1.0, _SHORTEN),
    IncidentCategory("faulty software changes", 0.10, 1.0, _ALL),
    IncidentCategory("faulty policies or procedures", 0.10, 1.0, _ALL),
    IncidentCategory("other causes", 0.17, 1.0, frozenset()),
)
DEFAULT_FRACTIONS = {Scenario.CONSERVATIVE.value: 0.30, Scenario.OPTIMISTIC.value: 0.80}


@dataclass(frozen=True)
class IncidentModel:
    categories: tuple[IncidentCategory, ...] = DEFAULT_CATEGORIES
    scenario_fraction: dict = field(default_factory=lambda: dict(DEFAULT_FRACTIONS))

    def __post_init__(self):
        if not self.categories:
            raise InvalidModel("model has no categories")
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise InvalidModel("duplicate category names")
        for c in self.categories:
            if not 0.0 <= c.share <= 1.0:
                raise InvalidModel(f"{c.name}: share {c.share} outside [0, 1]")
            if not c.mean_duration > 0:
                raise InvalidModel(f"{c.name}: mean duration must be positive")
            bad = set(c.addressable_by) - set(_ALL)
            if bad:
                raise InvalidModel(f"{c.name}: unknown processes {sorted(map(str, bad))}")
        if sum(c.share for c in self.categories) > 1.0 + 1e-9:
            raise InvalidModel("category shares sum to more than 1")
        for key, f in self.scenario_fraction.items():
            if not 0.0 <= f <= 1.0:
                raise InvalidModel(f"scenario fraction {key}={f} outside [0, 1]")

    @classmethod
    def from_json(cls, raw: dict) -> IncidentModel:
        try:
            cats = tuple(
                IncidentCategory(
                    c["name"],
                    float(c["share"]),
                    float(c.get("mean_duration", 1.0)),
                    frozenset(Process(p) for p in c.get("addressable_by", ())),
                )
                for c in raw.get("categories", [])
            ) or DEFAULT_CATEGORIES
            fractions = {**DEFAULT_FRACTIONS, **{k.lower(): float(v) for k, v in raw.get("scenario_fraction", {}).items()}}
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidModel(f"bad incident model: {exc}") from exc
        return cls(cats, fractions)

    @classmethod
    def load(cls, path: str | Path) -> IncidentModel:
        try:
            return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"bad incident model file: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "categories": [
                {
                    "name": c.name,
                    "share": c.share,
                    "mean_duration": c.mean_duration,
                    "addressable_by": sorted(p.value for p in c.addressable_by),
                }
                for c in self.categories
            ],
            "scenario_fraction": dict(self.scenario_fraction),
        }


@dataclass(frozen=True)
class CategorySavings:
    name: str
    impact: float
    avoided: float  # fraction of incidents that no longer happen
    shortened: float  # fraction of duration removed
    reduction: float  # fraction of impact removed


@dataclass(frozen=True)
class SavingsReport:
    scenario: str
    fraction: float
    categories: tuple[CategorySavings, ...]
    overall_addressable: float
    overall_total: float

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "fraction": self.fraction,
            "overall_addressable": self.overall_addressable,
            "overall_total": self.overall_total,
            "categories": [c.__dict__ for c in self.categories],
        }

    def text(self) -> str:
        lines = [f"scenario {self.scenario} (fraction {self.fraction:.2f})"]
        for c in self.categories:
            lines.append(
                f"  {c.name:<32} impact {c.impact:.3f}  avoided {c.avoided:.2f}"
                f"  shortened {c.shortened:.2f}  reduction {c.reduction:.2f}"
            )
        lines.append(f"overall (addressable incidents): {self.overall_addressable:.4f}")
        lines.append(f"overall (all incidents):         {self.overall_total:.4f}")
        return "\n".join(lines)


def opex_savings(m: IncidentModel, scenario: Scenario | str | float = Scenario.OPTIMISTIC) -> SavingsReport:
    """``scenario`` is a named scenario or a raw fraction in [0, 1]."""
    if isinstance(scenario, (int, float)):
        label, f = "custom", float(scenario)
        if not 0.0 <= f <= 1.0:
            raise InvalidModel(f"fraction {f} outside [0, 1]")
    else:
        label = Scenario(scenario.lower() if isinstance(scenario, str) else scenario).value
        if label not in m.scenario_fraction:
            raise InvalidModel(f"model has no fraction for scenario {label!r}")
        f = m.scenario_fraction[label]
    rows = []
    for c in m.categories:
        impact = c.share * c.mean_duration
        rows.append(
            CategorySavings(
                c.name,
                impact,
                f if Process.VERIFICATION in c.addressable_by else 0.0,
                f if c.addressable_by & _SHORTEN else 0.0,
                f if c.addressable else 0.0,
            )
        )
    total = sum(r.impact for r in rows)
    addr_impact = sum(r.impact for r, c in zip(rows, m.categories) if c.addressable)
    saved = sum(r.impact * r.reduction for r in rows)
    return SavingsReport(
        label,
        f,
        tuple(rows),
        saved / addr_impact if addr_impact > 0 else 0.0,
        saved / total if total > 0 else 0.0,
    )
