"""Scenario harness: mock upstreams plus a scripted session driver.

A scenario file declares mock server fixtures, gateway configuration, and an
ordered script of steps (list, describe, route, call, approve, deny,
assert). The runner wires everything through the public RPC surface, so a
passing scenario exercises the same paths a live client would. Transcripts
use a logical clock and deterministic ids, making replay byte-identical for
a fixed scenario and seed.
"""

from __future__ import annotations

import json
import queue as queue_mod
import threading
from dataclasses import dataclass, field
from typing import Any

from . import rpc
from .errors import ToolgateError
from .federation import UpstreamConfig
from .gateway import Gateway, GatewayConfig, load_config
from .guard import APPROVED, DENIED
from .mockserver import Fixture, InProcessTransport, MockServer, load_fixture
from .transports import ProcessTransport

DEFAULT_STEP_TIMEOUT = 30.0


class FixtureInvalid(ToolgateError):
    pass


class AssertionFailure(ToolgateError):
    def __init__(self, step_index: int, detail: str):
        self.step_index = step_index
        self.detail = detail
        super().__init__(f"step {step_index}: {detail}")


@dataclass
class Scenario:
    seed: int
    servers: list[Fixture]
    config: GatewayConfig
    script: list[dict[str, Any]]
    subprocess_servers: bool = False  # run mocks as real child processes

    @staticmethod
    def from_doc(doc: dict[str, Any] | str | bytes) -> "Scenario":
        if not isinstance(doc, dict):
            doc = json.loads(doc)
        try:
            servers = [load_fixture(f) for f in doc.get("servers", [])]
        except (KeyError, ToolgateError, ValueError) as exc:
            raise FixtureInvalid(f"bad server fixture: {exc}") from exc
        config = load_config(doc.get("config", {}))
        script = list(doc.get("script", []))
        # Steps must reference tools the fixtures actually define.
        known = {
            f"{fixture.server_id}.{tool.name}"
            for fixture in servers
            for tool in fixture.tools
        }
        for i, step in enumerate(script):
            name = step.get("name")
            if step.get("op") in ("call", "describe") and name not in known:
                raise FixtureInvalid(
                    f"step {i} references undefined tool {name!r}"
                )
        return Scenario(
            seed=int(doc.get("seed", 0)),
            servers=servers,
            config=config,
            script=script,
            subprocess_servers=bool(doc.get("subprocess_servers", False)),
        )


@dataclass
class StepRecord:
    index: int
    op: str
    outcome: dict[str, Any]


@dataclass
class CheckRecord:
    step_index: int
    check: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioResult:
    transcript: list[StepRecord] = field(default_factory=list)
    checks: list[CheckRecord] = field(default_factory=list)
    gateway: Gateway | None = None
    mocks: dict[str, MockServer] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def transcript_bytes(self) -> bytes:
        doc = [
            {"index": r.index, "op": r.op, "outcome": r.outcome}
            for r in self.transcript
        ]
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _LogicalClock:
    """Monotone counter standing in for wall time, so replays are identical."""

    def __init__(self) -> None:
        self._value = 0.0
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._value += 1.0
            return self._value


def _reply_doc(reply: rpc.RpcMessage | None) -> dict[str, Any]:
    if reply is None:
        return {"kind": "none"}
    if reply.kind == rpc.KIND_ERROR:
        assert reply.error is not None
        return {
            "kind": "error",
            "code": reply.error.code,
            "message": reply.error.message,
            "data": reply.error.data,
        }
    return {"kind": "response", "result": reply.result}


def run_scenario(scenario: Scenario, step_timeout: float = DEFAULT_STEP_TIMEOUT) -> ScenarioResult:
    """Execute a scenario script against a fresh gateway and mock upstreams.

    Gated calls run in worker threads: the runner waits until the call either
    finishes (reads) or parks in the approval queue, then moves on so a later
    approve/deny step can release it.
    """
    clock = _LogicalClock()
    gateway = Gateway(config=scenario.config, clock=clock)
    result = ScenarioResult(gateway=gateway)
    transports: list[ProcessTransport] = []
    server_transports: dict[str, Any] = {}
    try:
        for fixture in scenario.servers:
            if scenario.subprocess_servers:
                import sys
                import tempfile

                tmp = tempfile.NamedTemporaryFile(
                    "w", suffix=".json", delete=False, encoding="utf-8"
                )
                json.dump(_fixture_doc(fixture), tmp)
                tmp.close()
                transport: Any = ProcessTransport(
                    [sys.executable, "-m", "toolgate.mockserver", tmp.name]
                )
                transports.append(transport)
            else:
                mock = MockServer(fixture)
                result.mocks[fixture.server_id] = mock
                transport = InProcessTransport(mock)
            server_transports[fixture.server_id] = transport
            gateway.attach_upstream(
                UpstreamConfig(server_id=fixture.server_id), transport
            )

        events: queue_mod.Queue[tuple[str, Any]] = queue_mod.Queue()
        gateway.on_pending = lambda item: events.put(("pending", item))
        # One id counter across the script keeps request ids deterministic.
        next_id = [0]
        parked: dict[int, threading.Thread] = {}

        def new_id() -> int:
            next_id[0] += 1
            return next_id[0]

        def run_call(index: int, session: str, msg: rpc.RpcMessage) -> None:
            reply = gateway.handle_message(session, msg)
            events.put(("done", (index, reply)))

        def ensure_session(session: str) -> None:
            state = gateway.session(session).connection
            if state.phase == rpc.STATE_NEW:
                gateway.handle_message(
                    session, rpc.request(new_id(), "initialize", {})
                )
                gateway.handle_message(
                    session, rpc.notification("notifications/initialized")
                )

        for index, step in enumerate(scenario.script):
            op = step.get("op")
            session = step.get("session", "s1")
            outcome: dict[str, Any]
            if op == "list":
                ensure_session(session)
                reply = gateway.handle_message(
                    session,
                    rpc.request(
                        new_id(), "tools/list", {"tier": step.get("tier", "summary")}
                    ),
                )
                outcome = _reply_doc(reply)
            elif op == "describe":
                ensure_session(session)
                reply = gateway.handle_message(
                    session,
                    rpc.request(new_id(), "tools/describe", {"name": step["name"]}),
                )
                outcome = _reply_doc(reply)
            elif op == "route":
                outcome = gateway.route_goal(step["goal"], step.get("k"))
            elif op == "call":
                ensure_session(session)
                msg = rpc.request(
                    new_id(),
                    "tools/call",
                    {"name": step["name"], "arguments": step.get("arguments", {})},
                )
                worker = threading.Thread(
                    target=run_call, args=(index, session, msg), daemon=True
                )
                worker.start()
                kind, payload = events.get(timeout=step_timeout)
                if kind == "pending":
                    parked[index] = worker
                    outcome = {
                        "kind": "pending",
                        "approvalId": payload.approval_id,
                        "toolName": payload.tool_name,
                        "actionType": payload.action_type,
                    }
                else:
                    done_index, reply = payload
                    outcome = _reply_doc(reply)
            elif op in ("approve", "deny"):
                target = step.get("approval", "last")
                pending = gateway.approvals.list(state="pending")
                if target == "last":
                    if not pending:
                        raise AssertionFailure(index, "no pending approval to decide")
                    approval_id = pending[-1].approval_id
                else:
                    approval_id = target
                decision = APPROVED if op == "approve" else DENIED
                gateway.approvals.resolve(
                    approval_id, decision, step.get("principal", "script")
                )
                # The released worker finishes its call; collect its reply.
                kind, payload = events.get(timeout=step_timeout)
                assert kind == "done"
                done_index, reply = payload
                parked.pop(done_index, None)
                outcome = {
                    "approvalId": approval_id,
                    "decision": decision,
                    "released": _reply_doc(reply),
                    "releasedStep": done_index,
                }
            elif op == "assert":
                outcome = {"kind": "assert"}
            else:
                raise AssertionFailure(index, f"unknown op: {op!r}")

            result.transcript.append(StepRecord(index=index, op=op, outcome=outcome))
            _run_checks(result, index, step, outcome, gateway, server_transports)
    finally:
        for transport in transports:
            transport.close()
        gateway.on_pending = None
    return result


def _fixture_doc(fixture: Fixture) -> dict[str, Any]:
    from .schema_model import serialize_tool_schema

    return {
        "server_id": fixture.server_id,
        "tools": [serialize_tool_schema(t) for t in fixture.tools],
        "results": fixture.results,
        "failures": [
            {"tool": tool, "on_call": n, "code": code}
            for (tool, n), code in fixture.failures.items()
        ],
    }


def _run_checks(
    result: ScenarioResult,
    index: int,
    step: dict[str, Any],
    outcome: dict[str, Any],
    gateway: Gateway,
    server_transports: dict[str, Any],
) -> None:
    expect = step.get("expect", {})
    for check, wanted in expect.items():
        ok = False
        detail = ""
        if check == "error_code":
            got = outcome.get("code") or outcome.get("released", {}).get("code")
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "missing":
            data = outcome.get("data") or {}
            got = data.get("missing")
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "top":
            ranked = outcome.get("ranked", [])
            got = ranked[0]["name"] if ranked else None
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "result":
            got = outcome.get("result")
            if got is None:
                got = outcome.get("released", {}).get("result")
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "kind":
            ok = outcome.get("kind") == wanted
            detail = f"wanted {wanted}, got {outcome.get('kind')}"
        elif check == "recovery":
            data = outcome.get("data") or outcome.get("released", {}).get("data") or {}
            got = data.get("recovery")
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "executed":
            session = step.get("session", "s1")
            frame = gateway.frame_doc(session)
            # Per-service execution order is the contract; services iterate
            # in sorted id order so single-service checks are exact-order.
            got = [
                f"{sid}.{tool}"
                for sid in sorted(frame["services"])
                for tool in frame["services"][sid]["executed"]
            ]
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        elif check == "upstream_arg":
            server = wanted["server"]
            transport = server_transports.get(server)
            if transport is None:
                detail = f"no transport for {server}"
            else:
                # The mock's diagnostic method works over any transport, so
                # this check holds for child-process servers too.
                reply = transport.send(rpc.request("diag", "mock/calls"))
                calls = [
                    c["arguments"]
                    for c in reply.result["calls"]
                    if c["tool"] == wanted["tool"]
                ]
                got = calls[-1].get(wanted["name"]) if calls else None
                ok = got == wanted["value"]
                detail = f"wanted {wanted['value']!r}, got {got!r}"
        elif check == "pending_count":
            got = len(gateway.approvals.list(state="pending"))
            ok = got == wanted
            detail = f"wanted {wanted}, got {got}"
        else:
            detail = f"unknown check: {check}"
        result.checks.append(
            CheckRecord(step_index=index, check=check, ok=ok, detail=detail)
        )
