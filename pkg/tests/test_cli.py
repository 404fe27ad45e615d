import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn

from helpers import DATA
from spdevops.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from spdevops.troubleshoot.tsg import ELASTIC_FIREWALL_PATH

VCPE = str(DATA / "vcpe.nffg.json")
POLICIES = str(DATA / "policies.json")


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["verify", VCPE]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_input_errors(tmp_path, capsys):
    assert main(["verify", str(tmp_path / "missing.json"), POLICIES]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["extract", str(bad)]) == EXIT_INPUT
    toml = tmp_path / "bad.toml"
    toml.write_text("speed = 3\n")
    assert main(["run", str(toml), "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["oracle", VCPE, POLICIES, "--bits", "9"]) == EXIT_INPUT
    assert "error:" in capsys.readouterr().err


def test_verify_prints_six_verdicts(capsys, tmp_path):
    assert main(["verify", VCPE, POLICIES, "--out", str(tmp_path)]) == EXIT_OK
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)
    saved = json.loads((tmp_path / "verdicts.json").read_text())
    assert saved["all_hold"] and "elapsed_ms" not in saved["verdicts"][0]


def test_failed_policies_exit_one():
    assert main(["verify", str(DATA / "vcpe_block.nffg.json"), POLICIES, "--format", "json"]) == EXIT_FAIL


def test_extract_and_opex_formats(capsys):
    assert main(["extract", VCPE]) == EXIT_OK
    assert capsys.readouterr().out.count("chain ") == 3
    assert main(["opex", "--scenario", "conservative", "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["overall_addressable"] == pytest.approx(0.3)
    assert main(["opex", "--fraction", "0", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("category,impact")


def test_run_writes_identical_reports_twice(tmp_path):
    cfg = str(DATA / "ramp.toml")
    assert main(["run", cfg, "--seed", "4", "--out", str(tmp_path / "a"), "--snapshot"]) == EXIT_OK
    assert main(["run", cfg, "--seed", "4", "--out", str(tmp_path / "b"), "--snapshot"]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "snapshot.json" in names and "ledger.csv" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_troubleshoot_from_a_snapshot_file(tmp_path, capsys):
    snap = tmp_path / "snap.json"
    assert main(["snapshot", "--imbalanced", "-o", str(snap)]) == EXIT_OK
    assert main(["troubleshoot", str(ELASTIC_FIREWALL_PATH), "--snapshot", str(snap), "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "debug LoadBalancer"


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def server():
    port = _free_port()
    srv = uvicorn.Server(uvicorn.Config("spdevops.api:app", host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            httpx.get(url + "/health")
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    yield url
    srv.should_exit = True
    thread.join(timeout=5)


def test_server_mode_matches_local(server, tmp_path, capsys):
    assert main(["verify", VCPE, POLICIES, "--out", str(tmp_path / "local")]) == EXIT_OK
    assert main(["verify", VCPE, POLICIES, "--server", server, "--out", str(tmp_path / "remote")]) == EXIT_OK
    assert (tmp_path / "local" / "verdicts.json").read_bytes() == (tmp_path / "remote" / "verdicts.json").read_bytes()
    assert main(["opex", "--model", str(DATA / "incident_model.json"), "--server", server]) == EXIT_OK
    assert main(["oracle", VCPE, POLICIES, "--bits", "9", "--server", server]) == EXIT_INPUT
    assert main(["verify", VCPE, POLICIES, "--server", "http://127.0.0.1:1"]) == EXIT_INPUT
