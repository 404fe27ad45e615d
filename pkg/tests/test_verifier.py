import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import with_acl
from spdevops import fixtures
from spdevops.nffg import NFFG, Endpoint, Link, Rule, VnfInstance
from spdevops.oracle import arrives, oracle_reachability
from spdevops.packets import FULL, IntervalSet, PacketClass
from spdevops.verifier import (
    Cause,
    NoChainError,
    NotIsolatedError,
    Policy,
    PolicyKind,
    all_hold,
    check_isolation,
    check_reachability,
    dump_policies,
    load_policies,
    root_cause_isolation,
    timing_csv,
    timing_summary,
    verify_policy_set,
)
from spdevops.vnf import AclConfig, AclRule, VnfKind

REACH, ISOLATE = PolicyKind.REACHABILITY, PolicyKind.ISOLATION


def email(ports=(25,), **extra) -> PacketClass:
    return fixtures.service_class("EMAIL", "server_a", list(ports)).with_(**extra)


def deny(match: PacketClass) -> AclConfig:
    return AclConfig((AclRule(match, "DENY"),))


def test_web_to_server_c_is_reachable_with_witness():
    g = fixtures.vcpe_nffg("allow")
    p = Policy(REACH, "client", "server_c", fixtures.service_class("WEB", "server_c", [80]), "web")
    v = check_reachability(g, p)
    assert v.holds
    assert v.witness["path"] == ["client", "webcache", "fw", "nat", "server_c"]
    assert p.traffic.contains(v.witness["packet"])
    assert v.witness["delivered"]["src_ip"] == fixtures.NAT_PUBLIC_IP
    assert arrives(g, v.witness["packet"], "client", "server_c")
    assert oracle_reachability(g, p)


def test_direct_wiring_is_reachable():
    g = NFFG(
        (VnfInstance("c", VnfKind.ENDPOINT, ports=("out",)), VnfInstance("s", VnfKind.ENDPOINT, ports=("in",))),
        (Link("c", "out", "s", "in"),),
        (Endpoint("c", "client"), Endpoint("s", "server")),
        (Rule("c", 0, FULL, "out"),),
    )
    p = Policy(REACH, "c", "s", PacketClass.from_match({"dst_port": [443]}))
    v = check_reachability(g, p)
    assert v.holds and v.witness["path"] == ["c", "s"]


def test_default_deny_acl_blocks_everything():
    g = with_acl(fixtures.vcpe_nffg(), "fw", AclConfig((), "DENY"))
    for p in fixtures.vcpe_policies("allow"):
        assert not check_reachability(g, p).holds
        assert not oracle_reachability(g, p)
        assert check_isolation(g, p).holds


def test_email_isolation_by_port_deny():
    g = with_acl(fixtures.vcpe_nffg(), "fw", deny(FULL.with_(dst_port=IntervalSet.point(25))))
    p = Policy(ISOLATE, "client", "server_a", email())
    assert check_isolation(g, p).holds
    assert not oracle_reachability(g, p)


def test_ham_email_reaches_through_permissive_acl():
    g = fixtures.vcpe_nffg("allow")
    p = Policy(ISOLATE, "client", "server_a", email(spam_flag=frozenset({"HAM"})))
    assert not check_isolation(g, p).holds
    assert oracle_reachability(g, p)


def test_traffic_outside_every_chain_is_vacuously_isolated():
    g = fixtures.vcpe_nffg("allow")
    stray = fixtures.service_class("OTHER", "server_a", [25])
    p = Policy(ISOLATE, "client", "server_a", stray, "stray")
    v = root_cause_isolation(g, p)
    assert check_isolation(g, p).holds
    assert v.cause == Cause("client", "ENDPOINT") and v.prefix_checks == 0
    assert not check_reachability(g, Policy(REACH, "client", "server_a", stray)).holds


def test_acl_is_blamed_for_blocked_ham():
    g = with_acl(fixtures.vcpe_nffg(), "fw", deny(FULL.with_(app_class=frozenset({"EMAIL"}))))
    p = Policy(ISOLATE, "client", "server_a", email(spam_flag=frozenset({"HAM"})))
    v = root_cause_isolation(g, p)
    assert v.cause == Cause("fw", "ACL_FW")
    assert v.prefix_checks >= 1


def test_antispam_is_blamed_for_spam_only_traffic():
    g = fixtures.vcpe_nffg("allow")
    p = Policy(ISOLATE, "client", "server_a", email(spam_flag=frozenset({"SPAM"})))
    v = root_cause_isolation(g, p)
    assert v.cause == Cause("antispam", "ANTISPAM")
    assert not oracle_reachability(g, p)


def test_direct_chain_needs_one_prefix_check():
    g = fixtures.vcpe_nffg("block")
    p = Policy(ISOLATE, "client", "server_b", fixtures.service_class("OTHER", "server_b", [22]))
    v = root_cause_isolation(g, p)
    assert v.cause == Cause("fw", "ACL_FW")
    assert v.prefix_checks == 1


def test_block_configuration_blames_the_acl_everywhere():
    g = fixtures.vcpe_nffg("block")
    verdicts = verify_policy_set(g, fixtures.vcpe_policies("block"))
    assert len(verdicts) == 3 and all_hold(verdicts)
    assert {v.cause for v in verdicts} == {Cause("fw", "ACL_FW")}


def test_root_cause_requires_isolation():
    g = fixtures.vcpe_nffg("allow")
    with pytest.raises(NotIsolatedError):
        root_cause_isolation(g, Policy(ISOLATE, "client", "server_c", fixtures.service_class("WEB", "server_c")))


def test_missing_chain():
    g = fixtures.vcpe_nffg()
    p = Policy(REACH, "server_a", "server_b", FULL, "backwards")
    with pytest.raises(NoChainError):
        check_reachability(g, p)
    (v,) = verify_policy_set(g, [p])
    assert not v.holds and v.error.startswith("NoChainError")


def test_mixed_batch_all_hold_in_order():
    g = fixtures.vcpe_nffg("mixed")
    ps = fixtures.vcpe_policies("mixed")
    verdicts = verify_policy_set(g, ps)
    assert [v.policy_id for v in verdicts] == [p.id for p in ps]
    assert all_hold(verdicts)
    for v in verdicts:
        if v.kind is REACH:
            assert v.witness is not None and arrives(g, v.witness["packet"], "client", v.witness["path"][-1])
        else:
            assert v.cause == Cause("fw", "ACL_FW")
    summary = timing_summary(verdicts)
    assert {k: s["count"] for k, s in summary.items()} == {"REACHABILITY": 3, "ISOLATION": 3}
    assert all(s["max_ms"] >= s["mean_ms"] > 0 for s in summary.values())
    lines = timing_csv(verdicts).splitlines()
    assert lines[0] == "policy_id,kind,holds,elapsed_ms" and len(lines) == 7


def test_empty_batch():
    assert verify_policy_set(fixtures.vcpe_nffg(), []) == []


def test_invalid_graph_is_reported_per_policy():
    g = fixtures.vcpe_nffg()
    broken = NFFG(g.nodes, g.links, g.endpoints, g.rules + (Rule("fw", 9, FULL, "nowhere"),))
    verdicts = verify_policy_set(broken, fixtures.vcpe_policies())
    assert all(v.error and v.error.startswith("InvalidGraph") for v in verdicts)


def test_parallel_batch_matches_serial():
    g = fixtures.elastic_vcpe_nffg("mixed", firewalls=3)
    ps = fixtures.vcpe_policies("mixed") * 3
    serial = verify_policy_set(g, ps)
    parallel = verify_policy_set(g, ps, max_workers=4)
    assert [v.to_json() | {"elapsed_ms": 0} for v in serial] == [v.to_json() | {"elapsed_ms": 0} for v in parallel]


def test_repeated_verification_is_deterministic():
    g = fixtures.vcpe_nffg("mixed")
    ps = fixtures.vcpe_policies("mixed")
    runs = [[v.to_json() | {"elapsed_ms": 0} for v in verify_policy_set(g, ps)] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


@pytest.mark.parametrize("acl", ["mixed", "block", "allow"])
def test_verdicts_survive_scale_out(acl):
    ps = fixtures.vcpe_policies(acl)
    g = fixtures.elastic_vcpe_nffg(acl, firewalls=1)
    base = verify_policy_set(g, ps)
    for n in (2, 3, 5):
        g = fixtures.scaled(g, n)
        for a, b in zip(base, verify_policy_set(g, ps)):
            assert a.same_outcome(b)


def test_policy_json_roundtrip():
    ps = fixtures.vcpe_policies("mixed")
    assert load_policies(dump_policies(ps)) == ps
    with pytest.raises(ValueError):
        Policy(REACH, "a", "b", PacketClass(src_ip=IntervalSet()))


# random ACLs over the header values the vCPE policies use, so the oracle's
# reduced domain covers every distinction the rules can make
_PORTS = [22, 23, 25, 80, 587, 8080]


def random_vcpe_acl(rng: random.Random) -> AclConfig:
    rules = []
    for _ in range(rng.randint(0, 4)):
        m = {}
        if rng.random() < 0.6:
            m["dst_port"] = rng.sample(_PORTS, rng.randint(1, 3))
        if rng.random() < 0.4:
            # ranges stay below 3 so src_ip 3 stands in for every larger address
            lo = rng.randrange(3)
            m["src_ip"] = [[lo, rng.randrange(lo, 3)]]
        if rng.random() < 0.4:
            m["app_class"] = rng.sample(["WEB", "EMAIL", "OTHER"], rng.randint(1, 2))
        if rng.random() < 0.3:
            m["spam_flag"] = [rng.choice(["HAM", "SPAM"])]
        rules.append(AclRule(PacketClass.from_match(m), rng.choice(["PERMIT", "DENY"])))
    return AclConfig(tuple(rules), rng.choice(["PERMIT", "DENY"]))


def test_random_acl_batches_match_oracle():
    rng = random.Random(1234)
    ps = [
        Policy(kind, "client", srv, fixtures.service_class(app, srv, [port]), f"{kind.value}-{srv}-{port}")
        for app, srv, ports, _ in fixtures.SERVICES
        for port in ports
        for kind in (REACH, ISOLATE)
    ]
    for _ in range(100):
        g = with_acl(fixtures.vcpe_nffg(), "fw", random_vcpe_acl(rng))
        for p, v in zip(ps, verify_policy_set(g, ps, root_cause=False)):
            reach = oracle_reachability(g, p)
            assert v.holds == (reach if p.kind is REACH else not reach), p.id


@settings(max_examples=150)
@given(st.integers(0, 1_000_000))
def test_complement_law_and_witnesses(seed):
    g, p = fixtures.random_fixture(random.Random(seed))
    r = check_reachability(g, Policy(REACH, p.src, p.dst, p.traffic))
    i = check_isolation(g, Policy(ISOLATE, p.src, p.dst, p.traffic))
    assert i.holds == (not r.holds)
    if r.holds:
        assert p.traffic.contains(r.witness["packet"])
        assert arrives(g, r.witness["packet"], p.src, p.dst)
    else:
        assert i.holds
