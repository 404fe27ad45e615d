import itertools
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdevops import fixtures
from spdevops.nffg import (
    NFFG,
    CyclicRouteError,
    Endpoint,
    GraphUpdate,
    Link,
    NffgError,
    RejectedUpdate,
    Rule,
    VnfInstance,
    admitted_traffic,
    apply_update,
    apply_updates,
    dumps,
    extract_chains,
    loads,
    nffg_from_json,
    nffg_to_json,
    validate,
)
from spdevops.oracle import replay
from spdevops.packets import FULL, PacketSet
from spdevops.vnf import AclConfig, VnfKind


def direct_graph() -> NFFG:
    return NFFG(
        (VnfInstance("c", VnfKind.ENDPOINT, ports=("out",)), VnfInstance("s", VnfKind.ENDPOINT, ports=("in",))),
        (Link("c", "out", "s", "in"),),
        (Endpoint("c", "client"), Endpoint("s", "server")),
        (Rule("c", 0, FULL, "out"),),
    )


def kinds(chain) -> list[str]:
    return [n.kind.value for n in chain.middle]


def test_vcpe_fixtures_are_valid():
    for acl in ("allow", "block", "mixed"):
        assert validate(fixtures.vcpe_nffg(acl)) == []
        assert validate(fixtures.elastic_vcpe_nffg(acl, firewalls=3)) == []


def test_rule_on_missing_port_is_named():
    g = fixtures.vcpe_nffg()
    bad = Rule("fw", 5, FULL, "nowhere")
    problems = validate(NFFG(g.nodes, g.links, g.endpoints, g.rules + (bad,)))
    assert len(problems) == 1
    assert problems[0].kind == "rule"
    assert "fw" in problems[0].subject and "nowhere" in problems[0].subject


def test_disconnected_client_gives_one_connectivity_violation():
    g = direct_graph()
    lonely = NFFG(g.nodes, (), g.endpoints, ())
    problems = validate(lonely)
    assert [(p.kind, p.subject) for p in problems] == [("connectivity", "c")]


def test_structural_violations():
    g = direct_graph()
    dup = NFFG(g.nodes + (g.nodes[0],), g.links, g.endpoints, g.rules)
    assert any(p.kind == "duplicate-node" for p in validate(dup))
    dangling = NFFG(g.nodes, g.links + (Link("c", "out2", "x", "in"),), g.endpoints, g.rules)
    assert {p.kind for p in validate(dangling)} == {"dangling-link"}
    wrong = NFFG(g.nodes, g.links, g.endpoints + (Endpoint("ghost", "server"),), g.rules)
    assert any(p.kind == "endpoint" for p in validate(wrong))
    mismatched = NFFG(
        g.nodes + (VnfInstance("x", VnfKind.NAT, AclConfig(), ("in",)),), g.links, g.endpoints, g.rules
    )
    assert any(p.kind == "config-kind" for p in validate(mismatched))


def test_vcpe_has_three_chains():
    chains = extract_chains(fixtures.vcpe_nffg())
    assert len(chains) == 3
    by_server = {c.server: c for c in chains}
    assert kinds(by_server["server_a"]) == ["ANTISPAM", "ACL_FW", "NAT"]
    assert kinds(by_server["server_c"]) == ["WEB_CACHE", "ACL_FW", "NAT"]
    assert kinds(by_server["server_b"]) == ["ACL_FW", "NAT"]


def test_direct_wiring_gives_one_empty_chain():
    (chain,) = extract_chains(direct_graph())
    assert chain.path == ("c", "s") and chain.middle == ()
    assert chain.traffic.equivalent(PacketSet([FULL]))


@pytest.mark.parametrize("g", [fixtures.vcpe_nffg(), fixtures.elastic_vcpe_nffg(firewalls=3)])
def test_chains_cover_admitted_traffic_symbolically(g):
    chains = extract_chains(g)
    union = PacketSet()
    for a, b in itertools.combinations(chains, 2):
        assert a.traffic.intersect(b.traffic).is_empty()
    for c in chains:
        union = union.union(c.traffic)
    assert union.equivalent(admitted_traffic(g))


def probe_packets():
    # header values around every boundary the vCPE rules use
    for src, dst, dport, proto, app, spam in itertools.product(
        (0, 32767, 40000), (7, 1001, 1002, 1003), (22, 23, 25, 80, 587, 8080, 9999),
        ("TCP", "UDP"), ("WEB", "EMAIL", "OTHER"), ("HAM", "SPAM"),
    ):
        yield {"src_ip": src, "dst_ip": dst, "src_port": 1234, "dst_port": dport,
               "proto": proto, "app_class": app, "spam_flag": spam}


@pytest.mark.parametrize("g", [fixtures.vcpe_nffg(), fixtures.elastic_vcpe_nffg(firewalls=2)])
def test_chains_partition_traced_packets(g):
    chains = extract_chains(g)
    admitted = admitted_traffic(g)
    checked = 0
    for pkt in probe_packets():
        owners = [c for c in chains if c.traffic.contains(pkt)]
        if not admitted.contains(pkt):
            assert owners == []
            continue
        assert len(owners) == 1
        paths = replay(g, pkt, "client")
        delivered = [p for p in paths if p[-1] in g.servers]
        if delivered:
            assert [tuple(p) for p in delivered] == [owners[0].path]
        else:
            # dropped on the way: the concrete trace is a prefix of the chain
            assert all(tuple(p) == owners[0].path[: len(p)] for p in paths)
        checked += 1
    assert checked > 0


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_random_chains_are_disjoint_and_admitted(seed):
    g = fixtures.random_chain_nffg(random.Random(seed))
    chains = extract_chains(g)
    admitted = admitted_traffic(g)
    for a, b in itertools.combinations(chains, 2):
        assert a.traffic.intersect(b.traffic).is_empty()
    for c in chains:
        assert c.traffic.issubset(admitted)


def test_routing_loop_is_detected():
    nodes = (
        VnfInstance("c", VnfKind.ENDPOINT, ports=("out",)),
        VnfInstance("s", VnfKind.ENDPOINT, ports=("in",)),
        VnfInstance("a", VnfKind.ACL_FW, AclConfig(), ("in", "out", "back")),
        VnfInstance("b", VnfKind.ACL_FW, AclConfig(), ("in", "out")),
    )
    links = (
        Link("c", "out", "a", "in"),
        Link("a", "out", "b", "in"),
        Link("b", "out", "a", "in"),
        Link("a", "back", "s", "in"),
    )
    rules = (Rule("c", 0, FULL, "out"), Rule("a", 0, FULL, "out"), Rule("b", 0, FULL, "out"))
    g = NFFG(nodes, links, (Endpoint("c", "client"), Endpoint("s", "server")), rules)
    with pytest.raises(CyclicRouteError):
        extract_chains(g)


def test_scale_out_update_is_valid_and_bumps_version():
    g = fixtures.elastic_vcpe_nffg(firewalls=2)
    g2 = g
    for u in fixtures.scale_out_updates(g):
        g2 = apply_update(g2, u)
    assert validate(g2) == []
    assert fixtures.firewall_count(g2) == 3
    assert g2.version == g.version + len(fixtures.scale_out_updates(g))
    assert fixtures.firewall_count(g) == 2  # persistent: the input is untouched
    assert apply_update(g, fixtures.scale_out_updates(g)[0]).version == g.version + 1


def test_removing_a_linked_node_is_rejected():
    g = fixtures.vcpe_nffg()
    with pytest.raises(RejectedUpdate) as err:
        apply_update(g, GraphUpdate.remove_node("antispam"))
    assert err.value.violation.kind == "dangling-link"


def test_removing_the_last_firewall_breaks_connectivity():
    g = fixtures.elastic_vcpe_nffg(firewalls=1)
    with pytest.raises(RejectedUpdate) as err:
        apply_update(g, GraphUpdate.remove_node("fw_1"))
    assert "connectivity" in {v.kind for v in err.value.violations}
    with pytest.raises(RejectedUpdate) as err:
        apply_updates(g, fixtures.scale_in_updates(g))
    assert "connectivity" in {v.kind for v in err.value.violations}


def test_rejected_update_leaves_graph_identical():
    g = fixtures.elastic_vcpe_nffg(firewalls=2)
    before = json.dumps(nffg_to_json(g), sort_keys=True)
    bad = [
        GraphUpdate.remove_node("nat"),
        GraphUpdate.add_link(Link("fw_1", "missing", "nat", "in")),
        GraphUpdate.set_rules("fw_1", [Rule("fw_1", 0, FULL, "nope")]),
        GraphUpdate.add_node(VnfInstance("nat", VnfKind.ENDPOINT)),
        GraphUpdate.remove_link(Link("a", "b", "c", "d")),
    ]
    for u in bad:
        with pytest.raises(RejectedUpdate):
            apply_update(g, u)
    assert json.dumps(nffg_to_json(g), sort_keys=True) == before


@pytest.mark.parametrize(
    "g",
    [fixtures.vcpe_nffg("mixed"), fixtures.elastic_vcpe_nffg("block", 4, skew=0.7), direct_graph()]
    + [fixtures.random_chain_nffg(random.Random(i)) for i in range(5)],
)
def test_json_roundtrip(g):
    assert nffg_from_json(nffg_to_json(g)) == g
    assert loads(dumps(g)) == g


def test_malformed_document_is_an_nffg_error():
    with pytest.raises(NffgError):
        nffg_from_json({"nodes": [{"id": "x"}]})
    with pytest.raises(NffgError):
        nffg_from_json({"nodes": [{"id": "x", "kind": "ROUTER"}]})


def test_rename_keeps_chain_shape():
    g = fixtures.elastic_vcpe_nffg(firewalls=2)
    r = g.rename({"fw_1": "alpha", "nat": "translator", "client": "home"})
    assert validate(r) == []
    assert sorted(tuple(kinds(c)) for c in extract_chains(r)) == sorted(tuple(kinds(c)) for c in extract_chains(g))
    assert r.clients == ["home"]
