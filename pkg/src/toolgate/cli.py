"""Operator command line: lint, convert, serve, measure, bench, approve.

Every failure path prints one machine-parsable JSON line to stderr and
exits nonzero, so wrapping scripts never have to scrape prose.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import urllib.error
import urllib.request
from pathlib import Path
from typing import Any

from . import ensemble
from .corpus import make_routing_scenarios
from .errors import ToolgateError
from .federation import Catalog, UpstreamConfig, register_upstream, route
from .gateway import DEFAULT_PORT, Gateway, GatewayServer, load_config
from .harness import Scenario, run_scenario
from .lint import lint_catalog
from .mockserver import InProcessTransport, MockServer, load_fixture
from .schema_model import (
    parse_sgd_schema,
    parse_tool_schema,
    serialize_tool_schema,
    sgd_to_mcp,
)
from .tokens import SessionUsage, measure
from .transports import HttpTransport, ProcessTransport


def _fail(message: str, code: int = 1) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def _load_tool_docs(path: Path) -> list[Any]:
    """A lintable file is one tool doc, {"tools": [...]}, or a JSON array."""
    doc = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(doc, list):
        return doc
    if isinstance(doc, dict) and "tools" in doc:
        return list(doc["tools"])
    return [doc]


def cmd_lint(args: argparse.Namespace) -> int:
    tools = []
    for raw_path in args.paths:
        path = Path(raw_path)
        if not path.exists():
            return _fail(f"no such file: {raw_path}")
        for doc in _load_tool_docs(path):
            tools.append(parse_tool_schema(doc))
    report = lint_catalog(tools)
    if args.format == "json":
        print(
            json.dumps(
                {
                    "findings": [
                        {
                            "rule_id": f.rule_id,
                            "severity": f.severity,
                            "target": f.target,
                            "message": f.message,
                        }
                        for f in report.findings
                    ],
                    "checks": report.checks,
                    "errors": len(report.errors),
                    "warnings": len(report.warnings),
                    "score": report.score,
                },
                indent=2,
            )
        )
    else:
        for f in report.findings:
            print(f"{f.rule_id} {f.severity} {f.target}: {f.message}")
        print(
            f"score {report.score:.4f}"
            f" ({len(report.errors)} errors, {len(report.warnings)} warnings,"
            f" {report.checks} checks)"
        )
    return 1 if report.errors else 0


def cmd_convert(args: argparse.Namespace) -> int:
    path = Path(args.sgd)
    if not path.exists():
        return _fail(f"no such file: {args.sgd}")
    service = parse_sgd_schema(path.read_text(encoding="utf-8"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for tool in sgd_to_mcp(service):
        target = out_dir / f"{tool.name}.json"
        target.write_text(
            json.dumps(serialize_tool_schema(tool), indent=2) + "\n", encoding="utf-8"
        )
        written.append(str(target))
    print(json.dumps({"written": written}))
    return 0


def _build_transport(entry: dict[str, Any], base_dir: Path) -> Any:
    transport = entry.get("transport", {})
    kind = transport.get("kind")
    if kind == "stdio-command":
        return ProcessTransport(transport["command"])
    if kind == "http-url":
        return HttpTransport(transport["url"])
    if kind == "mock-fixture":
        # Relative fixture paths resolve against the config file's directory.
        path = Path(transport["path"])
        if not path.is_absolute():
            path = base_dir / path
        return InProcessTransport(MockServer(load_fixture(path.read_text(encoding="utf-8"))))
    raise ToolgateError(f"unknown transport kind: {kind!r}")


def cmd_serve(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    config = load_config(config_path.read_text(encoding="utf-8"))
    if args.no_gate:
        config.gate_enabled = False
    gateway = Gateway(config=config)
    for entry in config.upstreams:
        upstream_config = UpstreamConfig(
            server_id=entry["server_id"],
            allowlisted=bool(entry.get("allowlisted", True)),
            category=entry.get("category"),
        )
        gateway.attach_upstream(upstream_config, _build_transport(entry, config_path.parent))

    host, port = "127.0.0.1", args.http_port
    bind = os.environ.get("TOOLGATE_BIND")
    if bind:
        if ":" in bind:
            host, bind_port = bind.rsplit(":", 1)
            port = int(bind_port)
        else:
            host = bind
    server = GatewayServer(gateway, host=host, port=port)
    print(
        json.dumps(
            {
                "listening": f"http://{host}:{server.port}",
                "upstreams": sorted(gateway.catalog.snapshot()),
                "gate_enabled": config.gate_enabled,
            }
        ),
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def cmd_measure(args: argparse.Namespace) -> int:
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        return _fail(f"not a directory: {args.corpus}")
    tools = []
    for path in sorted(corpus_dir.glob("*.json")):
        for doc in _load_tool_docs(path):
            tools.append(parse_tool_schema(doc))
    if not tools:
        return _fail(f"no tool documents under {args.corpus}")
    with open(args.script, "r", encoding="utf-8") as fh:
        script = json.load(fh)
    usage = SessionUsage(
        served_tier=script.get("served_tier", "progressive"),
        expansions=list(script.get("expansions", [])),
    )
    report = measure(tools, usage)
    doc = {
        "mode": report.mode,
        "catalog_tokens": report.catalog_tokens,
        "expansion_tokens": report.expansion_tokens,
        "extra_round_trips": report.extra_round_trips,
        "static_total": report.static_total,
        "progressive_total": report.progressive_total,
        "reduction": report.reduction,
    }
    if args.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(f"{'mode':<14}{'up-front':>10}{'expanded':>10}{'total':>10}")
        print(f"{'static':<14}{report.static_total:>10}{0:>10}{report.static_total:>10}")
        print(
            f"{'progressive':<14}{report.catalog_tokens:>10}"
            f"{report.expansion_tokens:>10}{report.progressive_total:>10}"
        )
        print(f"reduction vs static: {report.reduction:.4f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.kind == "ensemble":
        return _bench_ensemble(args)
    if args.kind == "route":
        return _bench_route(args)
    return _bench_gating(args)


def _bench_ensemble(args: argparse.Namespace) -> int:
    if not args.scenario:
        return _fail("bench ensemble requires --scenario")
    with open(args.scenario, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    weights = doc.get("experts", {})
    if isinstance(weights, list):
        weights = {name: 1.0 for name in weights}
    pool = ensemble.ExpertPool(
        weights=dict(weights), epsilon=float(doc.get("epsilon", ensemble.DEFAULT_EPSILON))
    )
    rounds = [
        (ensemble.ProposalSet(proposals=dict(r["proposals"])), r["truth"])
        for r in doc.get("rounds", [])
    ]
    _, outcomes = ensemble.run_scenario(
        pool,
        rounds,
        randomized=bool(doc.get("randomized", False)),
        seed=int(doc.get("seed", 0)),
    )
    expert_names = sorted(pool.weights)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["round", "winner", "truth", "correct"] + expert_names)
    for outcome in outcomes:
        writer.writerow(
            [outcome.round_index, outcome.winner, outcome.truth, int(outcome.correct)]
            + [f"{outcome.weights_after[e]:.6g}" for e in expert_names]
        )
    sys.stdout.write(buf.getvalue())
    return 0


def _scenario_pass_fail(result: Any) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["step", "check", "ok", "detail"])
    for check in result.checks:
        writer.writerow([check.step_index, check.check, int(check.ok), check.detail])
    sys.stdout.write(buf.getvalue())
    print("PASS" if result.passed else "FAIL")
    return 0 if result.passed else 1


def _bench_route(args: argparse.Namespace) -> int:
    if args.scenario:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            scenario = Scenario.from_doc(fh.read())
        return _scenario_pass_fail(run_scenario(scenario))
    # Built-in distractor benchmark: rank the planted target among 19 noise
    # tools across the generated scenario set.
    scenarios = make_routing_scenarios(n_scenarios=args.builtin)
    hits = 0
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["scenario", "target", "top1", "hit"])
    for i, rs in enumerate(scenarios):
        catalog = Catalog()
        for server in rs.catalog_servers:
            mock = MockServer(
                load_fixture(
                    {
                        "server_id": server.server_id,
                        "tools": [serialize_tool_schema(t) for t in server.tools],
                    }
                )
            )
            register_upstream(
                catalog,
                UpstreamConfig(server_id=server.server_id, category=server.category),
                InProcessTransport(mock),
            )
        ranked = route(rs.goal, catalog, k=1).ranked
        top1 = ranked[0][0] if ranked else ""
        hit = top1 == rs.target
        hits += int(hit)
        writer.writerow([i, rs.target, top1, int(hit)])
    sys.stdout.write(buf.getvalue())
    accuracy = hits / len(scenarios)
    print(f"top1_accuracy,{accuracy:.4f}")
    ok = accuracy >= 0.95
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _bench_gating(args: argparse.Namespace) -> int:
    if not args.scenario:
        return _fail("bench gating requires --scenario")
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario = Scenario.from_doc(fh.read())
    return _scenario_pass_fail(run_scenario(scenario))


def cmd_approve(args: argparse.Namespace) -> int:
    base = args.gateway.rstrip("/")
    if args.list:
        url = f"{base}/approvals?state=pending"
        try:
            with urllib.request.urlopen(url, timeout=10) as resp:
                doc = json.loads(resp.read())
        except urllib.error.URLError as exc:
            return _fail(f"cannot reach gateway: {exc}")
        for item in doc.get("approvals", []):
            print(
                f"{item['approvalId']} {item['toolName']}"
                f" {item['actionType']} session={item['sessionId']}"
            )
        return 0
    if not args.id or not args.decision:
        return _fail("approve requires an id and --decision (or --list)")
    body = json.dumps(
        {"decision": args.decision, "principal": args.principal}
    ).encode("utf-8")
    req = urllib.request.Request(
        f"{base}/approvals/{args.id}",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            print(resp.read().decode("utf-8"))
            return 0
    except urllib.error.HTTPError as exc:
        return _fail(f"gateway rejected decision: {exc.read().decode('utf-8')}")
    except urllib.error.URLError as exc:
        return _fail(f"cannot reach gateway: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolgate",
        description="schema-governance federation gateway for LLM tool protocols",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lint = sub.add_parser("lint", help="check tool documents against the rule set")
    p_lint.add_argument("paths", nargs="+")
    p_lint.add_argument("--format", choices=["json", "text"], default="text")
    p_lint.set_defaults(func=cmd_lint)

    p_convert = sub.add_parser("convert", help="convert a service schema to tool documents")
    p_convert.add_argument("sgd")
    p_convert.add_argument("-o", "--out", required=True)
    p_convert.set_defaults(func=cmd_convert)

    p_serve = sub.add_parser("serve", help="run the gateway")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--http-port", type=int, default=DEFAULT_PORT)
    p_serve.add_argument(
        "--no-gate",
        action="store_true",
        help="log gated calls instead of blocking them (unsafe, demos only)",
    )
    p_serve.set_defaults(func=cmd_serve)

    p_measure = sub.add_parser("measure", help="token accounting over a corpus")
    p_measure.add_argument("--corpus", required=True)
    p_measure.add_argument("--script", required=True)
    p_measure.add_argument("--format", choices=["json", "table"], default="table")
    p_measure.set_defaults(func=cmd_measure)

    p_bench = sub.add_parser("bench", help="run benchmark scenarios")
    p_bench.add_argument("kind", choices=["ensemble", "route", "gating"])
    p_bench.add_argument("--scenario")
    p_bench.add_argument(
        "--builtin", type=int, default=50, help="bench route: generated scenario count"
    )
    p_bench.set_defaults(func=cmd_bench)

    p_approve = sub.add_parser("approve", help="decide pending approvals over HTTP")
    p_approve.add_argument("id", nargs="?")
    p_approve.add_argument("--list", action="store_true")
    p_approve.add_argument("--decision", choices=["approved", "denied"])
    p_approve.add_argument("--principal", default="cli")
    p_approve.add_argument(
        "--gateway", default=f"http://127.0.0.1:{DEFAULT_PORT}"
    )
    p_approve.set_defaults(func=cmd_approve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToolgateError as exc:
        return _fail(str(exc))
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    raise SystemExit(main())
