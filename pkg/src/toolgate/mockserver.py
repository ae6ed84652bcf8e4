"""Fixture-driven mock upstream tool server.

Speaks the full connection lifecycle over an in-process transport or
newline-delimited stdio. Fixtures declare the served tools, canned results
per tool, and optional fault injections (fail the Nth call to a tool with a
declared failure code). Used by the test suite and the scenario harness as
the upstream side of the gateway.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import Any, TextIO

from . import rpc
from .schema_model import (
    ToolSchema,
    parse_tool_schema,
    serialize_tool_schema,
    validate_arguments,
)
from .errors import ToolgateError


@dataclass
class Fixture:
    server_id: str
    tools: list[ToolSchema] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)  # bare tool -> canned result
    # (bare tool, 1-based call number) -> failure code returned instead of a result
    failures: dict[tuple[str, int], str] = field(default_factory=dict)


def load_fixture(doc: dict[str, Any] | str | bytes) -> Fixture:
    if not isinstance(doc, dict):
        doc = json.loads(doc)
    tools = [parse_tool_schema(t) for t in doc.get("tools", [])]
    failures = {}
    for entry in doc.get("failures", []):
        failures[(entry["tool"], int(entry.get("on_call", 1)))] = entry["code"]
    return Fixture(
        server_id=doc["server_id"],
        tools=tools,
        results=dict(doc.get("results", {})),
        failures=failures,
    )


class MockServer:
    """One upstream server instance with its own connection state."""

    def __init__(self, fixture: Fixture):
        self.fixture = fixture
        self.state = rpc.ConnectionState()
        self.call_counts: dict[str, int] = {}
        self.calls: list[tuple[str, dict[str, Any]]] = []  # (tool, args) log
        self._by_name = {tool.name: tool for tool in fixture.tools}

    def _dispatch(self, msg: rpc.RpcMessage) -> Any:
        if msg.method == "tools/list":
            return {"tools": [serialize_tool_schema(t) for t in self.fixture.tools]}
        params = msg.params if isinstance(msg.params, dict) else {}
        name = params.get("name")
        if msg.method == "tools/describe":
            tool = self._by_name.get(name)
            if tool is None:
                raise rpc.RpcDispatchError(rpc.UNKNOWN_TOOL, f"unknown tool: {name}")
            return serialize_tool_schema(tool)
        assert msg.method == "tools/call"
        tool = self._by_name.get(name)
        if tool is None:
            raise rpc.RpcDispatchError(rpc.UNKNOWN_TOOL, f"unknown tool: {name}")
        args = params.get("arguments") or {}
        try:
            validate_arguments(tool, args)
        except ToolgateError as exc:
            raise rpc.RpcDispatchError(rpc.INVALID_PARAMS, str(exc))
        count = self.call_counts.get(name, 0) + 1
        self.call_counts[name] = count
        self.calls.append((name, dict(args)))
        failure_code = self.fixture.failures.get((name, count))
        if failure_code is not None:
            raise rpc.RpcDispatchError(
                -32000, f"{name} failed", {"code": failure_code}
            )
        if name in self.fixture.results:
            return self.fixture.results[name]
        return {"ok": True, "tool": name}

    def handle(self, msg: rpc.RpcMessage) -> rpc.RpcMessage | None:
        # Diagnostic side-channel for harnesses: report observed tool calls
        # without disturbing the lifecycle state machine.
        if msg.kind == rpc.KIND_REQUEST and msg.method == "mock/calls":
            calls = [{"tool": tool, "arguments": args} for tool, args in self.calls]
            return rpc.response(msg.id, {"calls": calls})
        return rpc.step(self.state, msg, self._dispatch)

    def handle_bytes(self, raw: bytes | str) -> bytes | None:
        try:
            msg = rpc.decode(raw)
        except rpc.RpcError as exc:
            return rpc.encode(
                rpc.error_response(None, exc.code, exc.message, exc.data)
            )
        reply = self.handle(msg)
        if reply is None:
            return None
        return rpc.encode(reply)


class InProcessTransport:
    """Transport protocol adapter over a MockServer, for tests and config."""

    def __init__(self, server: MockServer):
        self.server = server

    def send(self, msg: rpc.RpcMessage) -> rpc.RpcMessage | None:
        return self.server.handle(msg)


def serve_stdio(fixture: Fixture, stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
    """Newline-delimited JSON-RPC loop until EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    server = MockServer(fixture)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        reply = server.handle_bytes(line)
        if reply is not None:
            stdout.write(reply.decode("utf-8") + "\n")
            stdout.flush()


def main(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 1:
        print("usage: python -m toolgate.mockserver <fixture.json>", file=sys.stderr)
        return 2
    with open(argv[0], "r", encoding="utf-8") as fh:
        fixture = load_fixture(fh.read())
    serve_stdio(fixture)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
