"""Shared strategies and brute-force set semantics for the test suite."""

from __future__ import annotations

import itertools
from pathlib import Path

from hypothesis import strategies as st

from spdevops.nffg import NFFG
from spdevops.packets import ENUM_DOMAINS, FIELDS, INT_FIELDS, IntervalSet, PacketClass
from spdevops.vnf import VnfKind

DATA = Path(__file__).resolve().parent.parent / "data"

SMALL = 4  # integer fields take values 0..3 in the reduced universe

# every packet of the reduced universe: 4^4 integer combinations times the enum domains
UNIVERSE = [
    dict(zip(FIELDS, combo))
    for combo in itertools.product(*([range(SMALL)] * len(INT_FIELDS)), *ENUM_DOMAINS.values())
]


def key(pkt: dict) -> tuple:
    return tuple(pkt[f] for f in FIELDS)


def _axis(c: PacketClass, f: str) -> list:
    dom = range(SMALL) if f in INT_FIELDS else ENUM_DOMAINS[f]
    return [v for v in dom if v in getattr(c, f)]


def concrete(*classes) -> set:
    """Packets of the reduced universe inside any of ``classes``, field by field."""
    out: set = set()
    for c in classes:
        out.update(itertools.product(*(_axis(c, f) for f in FIELDS)))
    return out


@st.composite
def small_intervals(draw, lo: int = 0, hi: int = SMALL - 1, allow_empty: bool = True):
    values = draw(st.sets(st.integers(lo, hi), min_size=0 if allow_empty else 1))
    return IntervalSet((v, v) for v in values)


@st.composite
def small_classes(draw, allow_empty: bool = False):
    """A class confined to the reduced universe."""
    kw = {f: draw(small_intervals(allow_empty=allow_empty)) for f in INT_FIELDS}
    for f, dom in ENUM_DOMAINS.items():
        kw[f] = frozenset(draw(st.sets(st.sampled_from(dom), min_size=0 if allow_empty else 1)))
    return PacketClass(**kw)


def with_acl(g: NFFG, node_id: str, config) -> NFFG:
    """Copy of ``g`` with one firewall's ACL replaced."""
    nodes = tuple(n if n.id != node_id else type(n)(n.id, VnfKind.ACL_FW, config, n.ports) for n in g.nodes)
    return NFFG(nodes, g.links, g.endpoints, g.rules, g.version)
