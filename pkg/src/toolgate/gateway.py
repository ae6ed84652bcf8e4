"""The gateway: one governed RPC surface over many upstream tool servers.

Each client session gets its own connection lifecycle, session frame, and
token-usage record. tools/call runs the full enforcement pipeline:
dependency check, binding fill, argument validation, approval gate (calls
block until a human decides), then forwarding to the owning upstream with
failure mapping on the way back. A thin stdlib HTTP layer exposes the RPC
surface plus the approval and frame endpoints the console consumes.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable
from urllib.parse import parse_qs, urlparse

from . import rpc
from .errors import ToolgateError
from .federation import (  # noqa: F401 (UpstreamConfig re-exported for callers)
    Catalog,
    Transport,
    UpstreamConfig,
    expand_tool,
    list_tools,
    refresh_upstream,
    register_upstream,
    route,
)
from .guard import (
    ApprovalQueue,
    APPROVED,
    DENIED,
    GATE_ALLOW,
    PENDING,
    SessionFrame,
    apply_bindings,
    capture_outputs,
    check_dependencies,
    gate,
    map_failure,
    scan_description,
)
from .lint import lint_tool
from .schema_model import validate_arguments
from .tokens import SessionUsage


DEFAULT_PORT = 8765
DEFAULT_APPROVAL_TIMEOUT = 300.0


@dataclass
class GatewayConfig:
    allowlist_enforced: bool = True
    default_tier: str = "summary"
    router_k: int = 5
    approval_timeout_seconds: float = DEFAULT_APPROVAL_TIMEOUT
    journal_path: str | None = None
    gate_enabled: bool = True  # --no-gate downgrades gating to log-only
    upstreams: list[dict[str, Any]] = field(default_factory=list)


def load_config(doc: dict[str, Any] | str | bytes) -> GatewayConfig:
    if not isinstance(doc, dict):
        doc = json.loads(doc)
    return GatewayConfig(
        allowlist_enforced=bool(doc.get("allowlist_enforced", True)),
        default_tier=doc.get("default_tier", "summary"),
        router_k=int(doc.get("router_k", 5)),
        approval_timeout_seconds=float(
            doc.get("approval_timeout_seconds", DEFAULT_APPROVAL_TIMEOUT)
        ),
        journal_path=doc.get("journal_path"),
        gate_enabled=bool(doc.get("gate_enabled", True)),
        upstreams=list(doc.get("upstreams", [])),
    )


@dataclass
class Session:
    session_id: str
    connection: rpc.ConnectionState = field(default_factory=rpc.ConnectionState)
    frame: SessionFrame = field(default_factory=SessionFrame)
    usage: SessionUsage = field(default_factory=SessionUsage)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class Gateway:
    """Sessions, catalog, and the enforcement pipeline, transport-agnostic."""

    def __init__(
        self,
        config: GatewayConfig | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.config = config or GatewayConfig()
        self.catalog = Catalog()
        self.clock = clock or time.time
        self.approvals = ApprovalQueue(
            journal_path=self.config.journal_path, clock=self.clock
        )
        self._sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        # Test/harness hook: called with the PendingApproval right after a
        # gated call is queued, before the worker blocks on the decision.
        self.on_pending: Callable[[Any], None] | None = None
        self.gate_log: list[dict[str, Any]] = []  # log-only records when gating is off

    # -- upstream management ------------------------------------------------

    def attach_upstream(self, config: UpstreamConfig, transport: Transport) -> int:
        return register_upstream(
            self.catalog,
            config,
            transport,
            enforce_allowlist=self.config.allowlist_enforced,
        )

    def refresh(self, server_id: str) -> int:
        return refresh_upstream(self.catalog, server_id)

    # -- sessions -----------------------------------------------------------

    def session(self, session_id: str) -> Session:
        with self._sessions_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = Session(session_id=session_id)
            return self._sessions[session_id]

    # -- RPC surface --------------------------------------------------------

    def handle_message(self, session_id: str, msg: rpc.RpcMessage) -> rpc.RpcMessage | None:
        """Step one message through a session's lifecycle and dispatcher.

        The per-session lock serializes the session's traffic; approval
        decisions arrive through a different path so a blocked gated call
        cannot deadlock its own release.
        """
        session = self.session(session_id)
        with session.lock:
            return rpc.step(session.connection, msg, lambda m: self._dispatch(session, m))

    def handle_bytes(self, session_id: str, raw: bytes | str) -> bytes | None:
        try:
            msg = rpc.decode(raw)
        except rpc.RpcError as exc:
            return rpc.encode(rpc.error_response(None, exc.code, exc.message, exc.data))
        reply = self.handle_message(session_id, msg)
        return rpc.encode(reply) if reply is not None else None

    def _dispatch(self, session: Session, msg: rpc.RpcMessage) -> Any:
        params = msg.params if isinstance(msg.params, dict) else {}
        if msg.method == "tools/list":
            tier = params.get("tier", self.config.default_tier)
            if tier not in ("summary", "full"):
                raise rpc.RpcDispatchError(
                    rpc.INVALID_PARAMS, f"unknown tier: {tier!r}"
                )
            return {"tools": list_tools(self.catalog, session.usage, tier)}
        if msg.method == "tools/describe":
            name = params.get("name")
            if not isinstance(name, str):
                raise rpc.RpcDispatchError(rpc.INVALID_PARAMS, "name must be a string")
            try:
                return expand_tool(self.catalog, session.usage, name)
            except ToolgateError as exc:
                raise rpc.RpcDispatchError(rpc.UNKNOWN_TOOL, str(exc))
        assert msg.method == "tools/call"
        return self._call(session, params)

    def _call(self, session: Session, params: dict[str, Any]) -> Any:
        name = params.get("name")
        if not isinstance(name, str):
            raise rpc.RpcDispatchError(rpc.INVALID_PARAMS, "name must be a string")
        raw_args = params.get("arguments") or {}
        if not isinstance(raw_args, dict):
            raise rpc.RpcDispatchError(rpc.INVALID_PARAMS, "arguments must be an object")
        try:
            server_id, bare, tool = self.catalog.resolve(name)
        except ToolgateError as exc:
            raise rpc.RpcDispatchError(rpc.UNKNOWN_TOOL, str(exc))

        missing = check_dependencies(session.frame, tool)
        if missing:
            raise rpc.RpcDispatchError(
                rpc.DEPENDENCY_UNMET,
                f"{name} requires tools that have not run in this session",
                {"missing": missing},
            )

        try:
            args = apply_bindings(session.frame, self.catalog, name, tool, raw_args)
        except ToolgateError as exc:
            raise rpc.RpcDispatchError(rpc.BINDING_UNSATISFIED, str(exc))

        try:
            args = validate_arguments(tool, args)
        except ToolgateError as exc:
            raise rpc.RpcDispatchError(rpc.INVALID_PARAMS, str(exc))

        detail = {
            "lintScore": lint_tool(tool).score,
            "poisonFindings": [
                {
                    "patternId": f.pattern_id,
                    "severity": f.severity,
                    "matchedText": f.matched_text,
                    "field": f.field,
                }
                for f in scan_description(tool)
            ],
        }
        if self.config.gate_enabled:
            decision = gate(
                self.approvals,
                session.session_id,
                session.frame,
                tool,
                args,
                detail=detail,
                tool_name=name,
            )
            if decision.outcome != GATE_ALLOW:
                assert decision.approval_id is not None
                if self.on_pending is not None:
                    self.on_pending(self.approvals.get(decision.approval_id))
                state = self.approvals.wait_for_decision(
                    decision.approval_id, timeout=self.config.approval_timeout_seconds
                )
                if state == PENDING:
                    raise rpc.RpcDispatchError(
                        rpc.APPROVAL_TIMEOUT,
                        f"approval {decision.approval_id} timed out",
                        {"approvalId": decision.approval_id},
                    )
                if state == DENIED:
                    raise rpc.RpcDispatchError(
                        rpc.DENIED,
                        f"call to {name} was denied",
                        {"code": "denied_by_user", "approvalId": decision.approval_id},
                    )
                assert state == APPROVED
        else:
            self.gate_log.append(
                {"tool": name, "arguments": dict(args), "detail": detail}
            )

        return self._forward(session, server_id, bare, name, tool, args)

    def _forward(
        self,
        session: Session,
        server_id: str,
        bare: str,
        name: str,
        tool: Any,
        args: dict[str, Any],
    ) -> Any:
        upstream = self.catalog.snapshot()[server_id]
        reply = upstream.transport.send(
            rpc.request(1, "tools/call", {"name": bare, "arguments": args})
        )
        if reply is None:
            raise rpc.RpcDispatchError(
                rpc.UPSTREAM_FAILURE, f"upstream {server_id} returned no reply"
            )
        if reply.kind == rpc.KIND_ERROR:
            assert reply.error is not None
            upstream_code = ""
            if isinstance(reply.error.data, dict):
                upstream_code = str(reply.error.data.get("code", ""))
            disposition = map_failure(tool, upstream_code)
            data: dict[str, Any] = {
                "code": disposition.code,
                "recovery": disposition.recovery,
                "upstreamMessage": reply.error.message,
            }
            if disposition.alternative is not None:
                data["alternative"] = disposition.alternative
            raise rpc.RpcDispatchError(
                rpc.UPSTREAM_FAILURE, f"{name} failed upstream", data
            )
        result = reply.result
        session.frame.record_execution(server_id, bare)
        capture_outputs(session.frame, server_id, tool, result)
        return result

    # -- console-facing operations -------------------------------------------

    def approvals_doc(self, state: str | None = None) -> list[dict[str, Any]]:
        now = self.clock()
        docs = []
        for item in self.approvals.list(state):
            docs.append(
                {
                    "approvalId": item.approval_id,
                    "sessionId": item.session_id,
                    "toolName": item.tool_name,
                    "actionType": item.action_type,
                    "arguments": item.arguments,
                    "state": item.state,
                    "createdAt": item.created_at,
                    "decidedAt": item.decided_at,
                    "decidedBy": item.decided_by,
                    "ageSeconds": max(0.0, now - item.created_at),
                    **item.detail,
                }
            )
        return docs

    def frame_doc(self, session_id: str) -> dict[str, Any]:
        return self.session(session_id).frame.to_doc()

    def route_goal(self, goal: str, k: int | None = None) -> dict[str, Any]:
        result = route(goal, self.catalog, k=k or self.config.router_k)
        return {
            "ranked": [{"name": n, "score": s} for n, s in result.ranked],
            "stage1Servers": result.stage1_servers,
        }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def _make_handler(gateway: Gateway) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format: str, *args: Any) -> None:
            pass  # tests and demos do not want request logs on stderr

        def _send(self, status: int, doc: Any) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> bytes:
            length = int(self.headers.get("Content-Length", "0"))
            return self.rfile.read(length) if length else b""

        def do_OPTIONS(self) -> None:  # CORS preflight for the console
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type, X-Session-Id")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self) -> None:
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            if parsed.path == "/healthz":
                self._send(200, {"ok": True})
                return
            if parsed.path == "/approvals":
                query = parse_qs(parsed.query)
                state = query.get("state", [None])[0]
                self._send(200, {"approvals": gateway.approvals_doc(state)})
                return
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "frame":
                self._send(200, gateway.frame_doc(parts[1]))
                return
            if parsed.path == "/route":
                query = parse_qs(parsed.query)
                goal = query.get("goal", [""])[0]
                k = query.get("k", [None])[0]
                self._send(200, gateway.route_goal(goal, int(k) if k else None))
                return
            self._send(404, {"error": "not found"})

        def do_POST(self) -> None:
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            if parsed.path == "/rpc":
                session_id = self.headers.get("X-Session-Id", "default")
                reply = gateway.handle_bytes(session_id, self._read_body())
                if reply is None:
                    self.send_response(204)
                    self.send_header("Access-Control-Allow-Origin", "*")
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(reply)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(reply)
                return
            if len(parts) == 2 and parts[0] == "approvals":
                try:
                    body = json.loads(self._read_body() or b"{}")
                except ValueError:
                    self._send(400, {"error": "body must be JSON"})
                    return
                decision = body.get("decision")
                principal = body.get("principal", "operator")
                if decision not in (APPROVED, DENIED):
                    self._send(400, {"error": "decision must be approved or denied"})
                    return
                from .guard import AlreadyDecided, UnknownApproval

                try:
                    item = gateway.approvals.resolve(parts[1], decision, principal)
                except UnknownApproval:
                    self._send(404, {"error": f"unknown approval: {parts[1]}"})
                    return
                except AlreadyDecided as exc:
                    self._send(
                        409,
                        {"error": "already decided", "state": exc.state},
                    )
                    return
                self._send(
                    200,
                    {
                        "approvalId": item.approval_id,
                        "state": item.state,
                        "decidedBy": item.decided_by,
                    },
                )
                return
            if len(parts) == 3 and parts[0] == "upstreams" and parts[2] == "refresh":
                try:
                    count = gateway.refresh(parts[1])
                except ToolgateError as exc:
                    self._send(404, {"error": str(exc)})
                    return
                self._send(200, {"tools": count})
                return
            self._send(404, {"error": "not found"})

    return Handler


class GatewayServer:
    """ThreadingHTTPServer wrapper with clean startup/shutdown for tests."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self.gateway = gateway
        self.httpd = ThreadingHTTPServer((host, port), _make_handler(gateway))
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        # A short poll interval keeps shutdown() snappy when tests stop
        # and restart servers dozens of times.
        self._thread = threading.Thread(
            target=lambda: self.httpd.serve_forever(poll_interval=0.05), daemon=True
        )
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
