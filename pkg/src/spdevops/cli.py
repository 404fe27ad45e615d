"""Command-line front-end.

Every subcommand runs in-process by default; with ``--server URL`` it sends
the same request to a running ``spdevops serve`` instead.

Exit codes: 0 success, 1 failed verification / rejected deployment / failed
check, 2 usage error, 3 file or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import httpx

from . import service
from .nffg import NffgError
from .opex import InvalidModel
from .oracle import DomainTooLarge
from .scenario import ConfigError, DeploymentRejected, ScenarioConfig
from .troubleshoot import ExprTypeError, TsgError, build_snapshot

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3


class InputError(Exception):
    pass


class RemoteFailure(Exception):
    """The server answered with a domain failure (e.g. a rejected deployment)."""


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _call(args, endpoint: str, local, payload: dict) -> dict:
    if not getattr(args, "server", None):
        return local()
    url = args.server.rstrip("/") + endpoint
    try:
        r = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        raise InputError(f"cannot reach {url}: {exc}") from exc
    if r.status_code == 409:
        raise RemoteFailure(r.json().get("detail", r.text))
    if r.status_code >= 400:
        raise InputError(f"server rejected request: {r.json().get('detail', r.text)}")
    return r.json()


def _write(out: str | None, files: dict[str, str]) -> None:
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --- subcommands --------------------------------------------------------------------------


def cmd_verify(args) -> int:
    nffg, policies = _read_json(args.nffg), _read_json(args.policies)
    res = _call(
        args,
        "/verify",
        lambda: service.verify(nffg, policies, not args.no_root_cause),
        {"nffg": nffg, "policies": policies, "root_cause": not args.no_root_cause},
    )
    verdicts = res["verdicts"]
    if args.format == "json":
        print(_dump(res), end="")
    elif args.format == "csv":
        print(
            _csv(
                ["policy_id", "kind", "holds", "cause", "elapsed_ms"],
                [[v["policy_id"], v["kind"], str(v["holds"]).lower(), _cause(v), f"{v['elapsed_ms']:.3f}"] for v in verdicts],
            ),
            end="",
        )
    else:
        for v in verdicts:
            status = "PASS" if v["holds"] and not v["error"] else "FAIL"
            extra = v["error"] or (f"cause {_cause(v)}" if v["cause"] else "")
            print(f"{status}  {v['policy_id']:<14} {v['kind']:<13} {v['elapsed_ms']:8.3f} ms  {extra}".rstrip())
        for kind, t in res["timing"].items():
            print(f"{kind}: n={t['count']} median {t['median_ms']:.3f} ms, max {t['max_ms']:.3f} ms")
    # wall-clock timings stay on stdout so report files are reproducible
    stable = [{k: val for k, val in v.items() if k != "elapsed_ms"} for v in verdicts]
    _write(args.out, {"verdicts.json": _dump({"all_hold": res["all_hold"], "verdicts": stable})})
    return EXIT_OK if res["all_hold"] else EXIT_FAIL


def _cause(v: dict) -> str:
    c = v.get("cause")
    return f"{c['node']}({c['kind']})" if c else ""


def cmd_extract(args) -> int:
    nffg = _read_json(args.nffg)
    res = _call(args, "/extract", lambda: service.extract(nffg), {"nffg": nffg})
    if not res["valid"]:
        for v in res["violations"]:
            print(v, file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        print(_dump(res), end="")
    elif args.format == "csv":
        print(_csv(["index", "client", "server", "path"], [[c["index"], c["client"], c["server"], " ".join(c["path"])] for c in res["chains"]]), end="")
    else:
        for c in res["chains"]:
            print(f"chain {c['index']}: " + " -> ".join(c["path"]))
    _write(args.out, {"chains.json": _dump(res)})
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = ScenarioConfig.from_toml(_read_text(args.config)).to_dict()
    except ConfigError as exc:
        raise InputError(f"{args.config}: {exc}") from exc
    seed = getattr(args, "seed", None)
    res = _call(
        args,
        "/scenario/run",
        lambda: service.run_scenario(cfg, seed, args.snapshot),
        {"config": cfg, "seed": seed, "snapshot": args.snapshot},
    )
    files = dict(res["reports"])
    if args.snapshot:
        files["snapshot.json"] = json.dumps(res["snapshot"], sort_keys=True) + "\n"
    _write(args.out or "out", files)
    if args.format == "json":
        print(_dump({"counters": res["counters"], "instances": res["instances"]}), end="")
    elif args.format == "csv":
        print(res["reports"]["ledger.csv"], end="")
    else:
        c = res["counters"]
        print("  ".join(f"{k}={v}" for k, v in c.items()))
        if c["central_events"]:
            print(f"raw samples per central event: {c['raw_samples'] / c['central_events']:.0f}")
        print(f"instances: {res['instances'][0] if res['instances'] else '-'} -> {res['instances'][-1] if res['instances'] else '-'}")
        print(f"reports written to {args.out or 'out'}/")
    return EXIT_OK


def cmd_snapshot(args) -> int:
    snap = build_snapshot(args.imbalanced, args.growing, getattr(args, "seed", None) or 0)
    text = json.dumps(snap, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_troubleshoot(args) -> int:
    tsg = _read_text(args.tsg)
    snap = _read_json(args.snapshot) if args.snapshot else None
    seed = getattr(args, "seed", None) or 0
    res = _call(
        args,
        "/troubleshoot",
        lambda: service.troubleshoot(tsg, snap, args.imbalanced, args.growing, seed),
        {"tsg": tsg, "snapshot": snap, "imbalanced": args.imbalanced, "growing": args.growing, "seed": seed},
    )
    body = {k: v for k, v in res.items() if k != "trace"}
    if args.format == "json":
        print(_dump(body), end="")
    elif args.format == "csv":
        print(_csv(["step", "node", "branch"], [[i + 1, n, res["branches"].get(n, "")] for i, n in enumerate(res["executed"])]), end="")
    else:
        print(res["trace"])
    _write(args.out, {"diagnosis.json": _dump(body), "trace.txt": res["trace"] + "\n"})
    return EXIT_OK


def cmd_opex(args) -> int:
    model = _read_json(args.model) if args.model else None
    scenario = args.fraction if args.fraction is not None else args.scenario
    res = _call(args, "/opex", lambda: service.opex(model, scenario), {"model": model, "scenario": scenario})
    body = {k: v for k, v in res.items() if k != "text"}
    if args.format == "json":
        print(_dump(body), end="")
    elif args.format == "csv":
        print(_csv(["category", "impact", "avoided", "shortened", "reduction"], [[c["name"], c["impact"], c["avoided"], c["shortened"], c["reduction"]] for c in res["categories"]]), end="")
    else:
        print(res["text"])
    _write(args.out, {"opex.json": _dump(body)})
    return EXIT_OK


def cmd_oracle(args) -> int:
    nffg, policies = _read_json(args.nffg), _read_json(args.policies)
    res = _call(
        args,
        "/oracle",
        lambda: service.oracle_check(nffg, policies, args.bits),
        {"nffg": nffg, "policies": policies, "bits": args.bits},
    )
    if args.format == "json":
        print(_dump(res), end="")
    elif args.format == "csv":
        print(_csv(["policy_id", "kind", "symbolic", "oracle", "agree"], [[r["policy_id"], r["kind"], r["symbolic"], r["oracle"], r["agree"]] for r in res["results"]]), end="")
    else:
        for r in res["results"]:
            mark = "ok      " if r["agree"] else "MISMATCH"
            print(f"{mark} {r['policy_id']:<14} symbolic={r['symbolic']} oracle={r['oracle']}")
    _write(args.out, {"oracle.json": _dump(res)})
    return EXIT_OK if res["agree"] else EXIT_FAIL


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("spdevops.api:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# --- parser --------------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the random seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="directory for report files")
    p.add_argument("--format", choices=("text", "json", "csv"), default=argparse.SUPPRESS)
    p.add_argument("--server", default=argparse.SUPPRESS, help="send the request to a running API server")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="spdevops", description="Verify, monitor and troubleshoot VNF service chains.", parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("verify", parents=[common], help="check reachability/isolation policies on an NF-FG")
    p.add_argument("nffg")
    p.add_argument("policies")
    p.add_argument("--no-root-cause", action="store_true", help="skip the root-cause search on failed isolation")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("extract", parents=[common], help="list the service chains of an NF-FG")
    p.add_argument("nffg")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("run", parents=[common], help="run an elastic-firewall scenario and write reports")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--snapshot", action="store_true", help="also write the final state as snapshot.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("snapshot", parents=[common], help="build a troubleshooting snapshot")
    p.add_argument("--imbalanced", action="store_true")
    p.add_argument("--growing", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("troubleshoot", parents=[common], help="run a troubleshooting graph")
    p.add_argument("tsg")
    p.add_argument("--snapshot", help="snapshot JSON (default: build one from the flags below)")
    p.add_argument("--imbalanced", action="store_true")
    p.add_argument("--growing", action="store_true")
    p.set_defaults(func=cmd_troubleshoot)

    p = sub.add_parser("opex", parents=[common], help="estimate OPEX savings")
    p.add_argument("--scenario", choices=("optimistic", "conservative"), default="optimistic")
    p.add_argument("--fraction", type=float, help="custom scenario fraction in [0, 1]")
    p.add_argument("--model", help="incident model JSON")
    p.set_defaults(func=cmd_opex)

    p = sub.add_parser("oracle", parents=[common], help="cross-check verdicts by brute-force enumeration")
    p.add_argument("nffg")
    p.add_argument("policies")
    p.add_argument("--bits", type=int, default=8)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("serve", parents=[common], help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args.format = getattr(args, "format", "text")
    args.out = getattr(args, "out", None)
    try:
        return args.func(args)
    except (DeploymentRejected, RemoteFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (InputError, NffgError, ConfigError, InvalidModel, TsgError, ExprTypeError, DomainTooLarge, LookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # every path must end in a documented code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
