import json

import pytest
from fastapi.testclient import TestClient

from helpers import DATA
from spdevops import __version__, fixtures
from spdevops.api import app
from spdevops.troubleshoot.tsg import ELASTIC_FIREWALL_PATH

client = TestClient(app)


def load(name):
    return json.loads((DATA / name).read_text())


def test_health():
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["version"] == __version__


def test_verify():
    r = client.post("/verify", json={"nffg": load("vcpe.nffg.json"), "policies": load("policies.json")})
    assert r.status_code == 200
    body = r.json()
    assert body["all_hold"] and len(body["verdicts"]) == 6
    assert set(body["timing"]) == {"REACHABILITY", "ISOLATION"}


def test_extract():
    body = client.post("/extract", json={"nffg": load("vcpe.nffg.json")}).json()
    assert body["valid"] and [c["server"] for c in body["chains"]] == ["server_a", "server_c", "server_b"]
    assert [c["kinds"][1:-1] for c in body["chains"]] == [
        ["ANTISPAM", "ACL_FW", "NAT"],
        ["WEB_CACHE", "ACL_FW", "NAT"],
        ["ACL_FW", "NAT"],
    ]


def test_oracle():
    body = client.post("/oracle", json={"nffg": load("vcpe.nffg.json"), "policies": load("policies.json")}).json()
    assert body["agree"] and len(body["results"]) == 6


def test_opex():
    body = client.post("/opex", json={"scenario": "conservative"}).json()
    assert body["overall_addressable"] == pytest.approx(0.30)
    assert client.post("/opex", json={"scenario": 0.0}).json()["overall_total"] == 0.0


def test_scenario_run():
    body = client.post("/scenario/run", json={"config": {"duration": 3}, "seed": 7}).json()
    assert body["config"]["seed"] == 7 and body["counters"]["raw_samples"] == 3 * 100 * 4 * 2
    assert set(body["reports"]) == {"timeseries.csv", "ledger.csv", "events.csv", "timeseries.dat"}


def test_troubleshoot():
    r = client.post("/troubleshoot", json={"tsg": ELASTIC_FIREWALL_PATH.read_text(), "imbalanced": True})
    assert r.status_code == 200 and r.json()["verdict"] == "debug LoadBalancer"


@pytest.mark.parametrize(
    "path, payload",
    [
        ("/verify", {"nffg": {"nodes": [{"id": "x"}]}, "policies": []}),
        ("/verify", {"policies": []}),
        ("/oracle", {"nffg": {}, "policies": [], "bits": 9}),
        ("/opex", {"model": {"categories": [{"name": "a", "share": 2.0}]}}),
        ("/scenario/run", {"config": {"speed": 1}}),
        ("/troubleshoot", {"tsg": "node a = nonsense"}),
    ],
)
def test_bad_input_is_422(path, payload):
    assert client.post(path, json=payload).status_code == 422


def test_rejected_deployment_is_409(monkeypatch):
    # block-configured firewalls against the mixed policy set cannot deploy
    original = fixtures.vcpe_policies
    monkeypatch.setattr(fixtures, "vcpe_policies", lambda acl="mixed": original("mixed"))
    r = client.post("/scenario/run", json={"config": {"duration": 1, "acl": "block"}})
    assert r.status_code == 409 and "initial verification failed" in r.json()["detail"]
