"""Symbolic packet classes: products of per-field value sets.

Integer header fields are interval sets over ``[0, 2**16)``; enumerated fields
are frozensets over small fixed domains.  A :class:`PacketClass` is a single
cube (a cartesian product), a :class:`PacketSet` is a finite union of pairwise
disjoint cubes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping

ADDR_BITS = 16
DOMAIN_MAX = (1 << ADDR_BITS) - 1

INT_FIELDS = ("src_ip", "dst_ip", "src_port", "dst_port")
ENUM_DOMAINS: dict[str, tuple[str, ...]] = {
    "proto": ("TCP", "UDP"),
    "app_class": ("WEB", "EMAIL", "OTHER"),
    "spam_flag": ("HAM", "SPAM"),
}
FIELDS = INT_FIELDS + tuple(ENUM_DOMAINS)


class IntervalSet:
    """Normalized set of integers: sorted, non-overlapping, non-adjacent closed intervals."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[tuple[int, int]] = ()):
        object.__setattr__(self, "intervals", _normalize(intervals))

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    @classmethod
    def full(cls, hi: int = DOMAIN_MAX) -> IntervalSet:
        return cls([(0, hi)])

    @classmethod
    def point(cls, value: int) -> IntervalSet:
        return cls([(value, value)])

    @classmethod
    def of(cls, *values: int) -> IntervalSet:
        return cls((v, v) for v in values)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):
        body = ",".join(f"{lo}" if lo == hi else f"{lo}-{hi}" for lo, hi in self.intervals)
        return f"IntervalSet({body})"

    def __bool__(self):
        return bool(self.intervals)

    def __contains__(self, value: int) -> bool:
        for lo, hi in self.intervals:
            if value < lo:
                return False
            if value <= hi:
                return True
        return False

    def __iter__(self) -> Iterator[int]:
        for lo, hi in self.intervals:
            yield from range(lo, hi + 1)

    def size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    def min(self) -> int:
        return self.intervals[0][0]

    def intersect(self, other: IntervalSet) -> IntervalSet:
        out = []
        a, b = self.intervals, other.intervals
        i = j = 0
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return _raw(tuple(out))

    def union(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet(self.intervals + other.intervals)

    def subtract(self, other: IntervalSet) -> IntervalSet:
        out = []
        b = other.intervals
        j = 0
        for lo, hi in self.intervals:
            cur = lo
            while j < len(b) and b[j][1] < cur:
                j += 1
            k = j
            while k < len(b) and b[k][0] <= hi:
                if b[k][0] > cur:
                    out.append((cur, b[k][0] - 1))
                cur = max(cur, b[k][1] + 1)
                if cur > hi:
                    break
                k += 1
            if cur <= hi:
                out.append((cur, hi))
        return _raw(tuple(out))

    def issubset(self, other: IntervalSet) -> bool:
        return not self.subtract(other)


def _raw(intervals: tuple[tuple[int, int], ...]) -> IntervalSet:
    s = IntervalSet.__new__(IntervalSet)
    object.__setattr__(s, "intervals", intervals)
    return s


def _normalize(intervals: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    items = sorted((int(lo), int(hi)) for lo, hi in intervals)
    out: list[tuple[int, int]] = []
    for lo, hi in items:
        if lo > hi:
            raise ValueError(f"inverted interval [{lo}, {hi}]")
        if lo < 0 or hi > DOMAIN_MAX:
            raise ValueError(f"interval [{lo}, {hi}] outside [0, {DOMAIN_MAX}]")
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


FULL_INTS = IntervalSet.full()
_EMPTY_INTS = IntervalSet()


@dataclass(frozen=True)
class PacketClass:
    src_ip: IntervalSet = FULL_INTS
    dst_ip: IntervalSet = FULL_INTS
    src_port: IntervalSet = FULL_INTS
    dst_port: IntervalSet = FULL_INTS
    proto: frozenset = frozenset(ENUM_DOMAINS["proto"])
    app_class: frozenset = frozenset(ENUM_DOMAINS["app_class"])
    spam_flag: frozenset = frozenset(ENUM_DOMAINS["spam_flag"])

    def __post_init__(self):
        for name, domain in ENUM_DOMAINS.items():
            value = frozenset(getattr(self, name))
            unknown = value - set(domain)
            if unknown:
                raise ValueError(f"{name}: unknown values {sorted(unknown)}")
            object.__setattr__(self, name, value)
        # any empty field collapses the whole cube to the canonical EMPTY value
        if any(not getattr(self, f) for f in FIELDS):
            for f in INT_FIELDS:
                object.__setattr__(self, f, _EMPTY_INTS)
            for f in ENUM_DOMAINS:
                object.__setattr__(self, f, frozenset())

    def is_empty(self) -> bool:
        return not self.src_ip

    def __bool__(self):
        return not self.is_empty()

    def with_(self, **changes) -> PacketClass:
        return replace(self, **changes)

    def get(self, name: str):
        return getattr(self, name)

    def size(self) -> int:
        n = 1
        for f in INT_FIELDS:
            n *= getattr(self, f).size()
        for f in ENUM_DOMAINS:
            n *= len(getattr(self, f))
        return n

    def sample(self) -> dict:
        """Smallest concrete packet of the class, as a field -> value dict."""
        if self.is_empty():
            raise ValueError("empty class has no packets")
        pkt = {f: getattr(self, f).min() for f in INT_FIELDS}
        for f, domain in ENUM_DOMAINS.items():
            pkt[f] = next(v for v in domain if v in getattr(self, f))
        return pkt

    def contains(self, packet: Mapping) -> bool:
        return all(packet[f] in getattr(self, f) for f in FIELDS)

    def to_match(self) -> dict:
        """Per-field encoding with full-domain fields omitted."""
        out: dict = {}
        for f in INT_FIELDS:
            v = getattr(self, f)
            if v != FULL_INTS:
                out[f] = [list(iv) for iv in v.intervals]
        for f, domain in ENUM_DOMAINS.items():
            v = getattr(self, f)
            if len(v) != len(domain):
                out[f] = [d for d in domain if d in v]
        return out

    @classmethod
    def from_match(cls, match: Mapping | None) -> PacketClass:
        match = dict(match or {})
        unknown = set(match) - set(FIELDS)
        if unknown:
            raise ValueError(f"unknown match fields {sorted(unknown)}")
        kwargs = {}
        for f in INT_FIELDS:
            if f in match:
                kwargs[f] = _parse_intervals(match[f])
        for f in ENUM_DOMAINS:
            if f in match:
                raw = match[f]
                kwargs[f] = frozenset([raw] if isinstance(raw, str) else raw)
        return cls(**kwargs)

    def __repr__(self):
        if self.is_empty():
            return "PacketClass(EMPTY)"
        body = ", ".join(f"{k}={v}" for k, v in self.to_match().items())
        return f"PacketClass({body or 'FULL'})"


def _parse_intervals(raw) -> IntervalSet:
    if isinstance(raw, int):
        return IntervalSet.point(raw)
    items = []
    for item in raw:
        if isinstance(item, int):
            items.append((item, item))
        else:
            lo, hi = item
            items.append((lo, hi))
    return IntervalSet(items)


FULL = PacketClass()
EMPTY = PacketClass(src_ip=_EMPTY_INTS)


def _field_and(name: str, a, b):
    if name in ENUM_DOMAINS:
        return a & b
    return a.intersect(b)


def _field_minus(name: str, a, b):
    if name in ENUM_DOMAINS:
        return a - b
    return a.subtract(b)


def pc_intersect(a: PacketClass, b: PacketClass) -> PacketClass:
    if a.is_empty() or b.is_empty():
        return EMPTY
    return PacketClass(**{f: _field_and(f, getattr(a, f), getattr(b, f)) for f in FIELDS})


def pc_subtract(a: PacketClass, b: PacketClass) -> list[PacketClass]:
    """``a \\ b`` as pairwise-disjoint cubes (at most one per field)."""
    if a.is_empty():
        return []
    common = pc_intersect(a, b)
    if common.is_empty():
        return [a]
    out = []
    prefix = {}
    for f in FIELDS:
        rest = _field_minus(f, getattr(a, f), getattr(b, f))
        if rest:
            piece = {g: getattr(a, g) for g in FIELDS}
            piece.update(prefix)
            piece[f] = rest
            out.append(PacketClass(**piece))
        prefix[f] = getattr(common, f)
    return out


def pc_subset(a: PacketClass, b: PacketClass) -> bool:
    if a.is_empty():
        return True
    for f in FIELDS:
        x, y = getattr(a, f), getattr(b, f)
        if f in ENUM_DOMAINS:
            if not x <= y:
                return False
        elif not x.issubset(y):
            return False
    return True


def pc_union(a: PacketClass, b: PacketClass) -> list[PacketClass]:
    """``a | b`` as pairwise-disjoint cubes."""
    if a.is_empty():
        return [b] if b else []
    return [a] + pc_subtract(b, a)


class PacketSet:
    """A finite union of pairwise-disjoint packet classes."""

    __slots__ = ("classes",)

    def __init__(self, classes: Iterable[PacketClass] = ()):
        disjoint: list[PacketClass] = []
        for c in classes:
            pieces = [c] if c else []
            for d in disjoint:
                pieces = [p for q in pieces for p in pc_subtract(q, d)]
                if not pieces:
                    break
            disjoint.extend(pieces)
        self.classes = tuple(disjoint)

    @classmethod
    def _trusted(cls, classes: Iterable[PacketClass]) -> PacketSet:
        s = cls.__new__(cls)
        s.classes = tuple(c for c in classes if c)
        return s

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def __bool__(self):
        return bool(self.classes)

    def __repr__(self):
        return f"PacketSet({list(self.classes)!r})"

    def is_empty(self) -> bool:
        return not self.classes

    def size(self) -> int:
        return sum(c.size() for c in self.classes)

    def intersect(self, other: PacketSet | PacketClass) -> PacketSet:
        others = [other] if isinstance(other, PacketClass) else list(other)
        return PacketSet._trusted(pc_intersect(a, b) for a in self.classes for b in others)

    def subtract(self, other: PacketSet | PacketClass) -> PacketSet:
        others = [other] if isinstance(other, PacketClass) else list(other)
        pieces = list(self.classes)
        for b in others:
            pieces = [p for q in pieces for p in pc_subtract(q, b)]
        return PacketSet._trusted(pieces)

    def union(self, other: PacketSet | PacketClass) -> PacketSet:
        others = [other] if isinstance(other, PacketClass) else list(other)
        return PacketSet(list(self.classes) + others)

    def issubset(self, other: PacketSet | PacketClass) -> bool:
        return self.subtract(other).is_empty()

    def equivalent(self, other: PacketSet | PacketClass) -> bool:
        other_set = other if isinstance(other, PacketSet) else PacketSet([other])
        return self.issubset(other_set) and other_set.issubset(self)

    def contains(self, packet: Mapping) -> bool:
        return any(c.contains(packet) for c in self.classes)
