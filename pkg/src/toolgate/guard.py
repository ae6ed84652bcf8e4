"""Runtime enforcement: approval gating, session frames, dependency and
binding resolution, description poisoning scan, failure mapping.

The guard sits between a model-driven client and the upstream tools. Reads
pass through; writes and destructive calls stop in a pending queue until a
human decides. Session frames remember what already executed and what each
call produced, so declared orderings can be enforced and declared output
bindings can fill downstream arguments mechanically.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ToolgateError
from .federation import Catalog
from .schema_model import (
    ACTION_READ,
    RECOVERY_ABORT,
    ToolSchema,
    classify_action,
)

GATE_ALLOW = "allow"
GATE_PENDING = "pending"

PENDING = "pending"
APPROVED = "approved"
DENIED = "denied"


class UnknownApproval(ToolgateError):
    def __init__(self, approval_id: str):
        self.approval_id = approval_id
        super().__init__(f"unknown approval: {approval_id}")


class AlreadyDecided(ToolgateError):
    def __init__(self, approval_id: str, state: str):
        self.approval_id = approval_id
        self.state = state
        super().__init__(f"approval {approval_id} already {state}")


class DependencyUnmet(ToolgateError):
    def __init__(self, tool: str, missing: list[str]):
        self.tool = tool
        self.missing = missing
        super().__init__(f"{tool} requires tools that have not run: {missing}")


class BindingSourceMissing(ToolgateError):
    def __init__(self, tool: str, param: str):
        self.tool = tool
        self.param = param
        super().__init__(
            f"{tool} parameter {param!r} is bound to an output that was never captured"
        )


# ---------------------------------------------------------------------------
# Session frames
# ---------------------------------------------------------------------------


@dataclass
class ServiceFrame:
    """Per-upstream execution memory inside one session."""

    executed: list[str] = field(default_factory=list)  # bare tool names, in order
    outputs: dict[str, Any] = field(default_factory=dict)  # "tool.path" -> value


@dataclass
class SessionFrame:
    services: dict[str, ServiceFrame] = field(default_factory=dict)
    # Global capture log: (server_id, bare_tool, source_path, value) in
    # execution order, so "latest capture wins" is well defined across services.
    capture_log: list[tuple[str, str, str, Any]] = field(default_factory=list)

    def service(self, server_id: str) -> ServiceFrame:
        if server_id not in self.services:
            self.services[server_id] = ServiceFrame()
        return self.services[server_id]

    def record_execution(self, server_id: str, bare_tool: str) -> None:
        self.service(server_id).executed.append(bare_tool)

    def record_output(
        self, server_id: str, bare_tool: str, source_path: str, value: Any
    ) -> None:
        self.service(server_id).outputs[f"{bare_tool}.{source_path}"] = value
        self.capture_log.append((server_id, bare_tool, source_path, value))

    def executed_anywhere(self) -> list[str]:
        """All executed namespaced names across services, in no particular order."""
        out = []
        for server_id, frame in self.services.items():
            out.extend(f"{server_id}.{bare}" for bare in frame.executed)
        return out

    def to_doc(self) -> dict[str, Any]:
        return {
            "services": {
                server_id: {
                    "executed": list(frame.executed),
                    "outputs": dict(frame.outputs),
                }
                for server_id, frame in self.services.items()
            }
        }


def _reference_satisfied(reference: str, executed: list[str]) -> bool:
    for done in executed:
        if done == reference or done.endswith("." + reference):
            return True
        # A namespaced requirement also matches its bare execution record.
        if reference.endswith("." + done):
            return True
    return False


def check_dependencies(frame: SessionFrame, tool: ToolSchema) -> list[str]:
    """Return declared prerequisites that have not executed, declaration order."""
    if tool.governance is None or not tool.governance.requires:
        return []
    executed = frame.executed_anywhere()
    return [
        reference
        for reference in tool.governance.requires
        if not _reference_satisfied(reference, executed)
    ]


def extract_path(result: Any, source_path: str) -> tuple[bool, Any]:
    """Walk a dotted path (prefixed "output.") into a call result.

    Returns (found, value); integer segments index into lists.
    """
    segments = source_path.split(".")
    if segments and segments[0] == "output":
        segments = segments[1:]
    value = result
    for segment in segments:
        if isinstance(value, dict):
            if segment not in value:
                return False, None
            value = value[segment]
        elif isinstance(value, list):
            try:
                value = value[int(segment)]
            except (ValueError, IndexError):
                return False, None
        else:
            return False, None
    return True, value


def capture_outputs(
    frame: SessionFrame,
    server_id: str,
    tool: ToolSchema,
    result: Any,
    catalog_bindings: list[tuple[str, str, str]] | None = None,
) -> None:
    """Record every declared output this tool feeds somewhere, if present.

    catalog_bindings supplies (source_path, target_tool, target_param) rows
    declared on this tool; when omitted they are read from the tool itself.
    """
    rows = catalog_bindings
    if rows is None:
        rows = []
        if tool.governance is not None:
            rows = [
                (b.source_path, b.target_tool, b.target_param)
                for b in tool.governance.bindings
            ]
    seen: set[str] = set()
    for source_path, _target_tool, _target_param in rows:
        if source_path in seen:
            continue
        seen.add(source_path)
        found, value = extract_path(result, source_path)
        if found:
            bare = tool.name.rsplit(".", 1)[-1]
            frame.record_output(server_id, bare, source_path, value)


def _bindings_targeting(
    catalog: Catalog, target: str
) -> list[tuple[str, str, str, str]]:
    """All declared bindings in the catalog that feed the target tool.

    Rows are (source_tool_namespaced, source_path, target_param, target_tool_ref).
    """
    rows = []
    for name, tool in catalog.tools().items():
        if tool.governance is None:
            continue
        for binding in tool.governance.bindings:
            ref = binding.target_tool
            if target == ref or target.endswith("." + ref) or ref.endswith("." + target):
                rows.append((name, binding.source_path, binding.target_param, ref))
    return rows


def apply_bindings(
    frame: SessionFrame,
    catalog: Catalog,
    target_name: str,
    tool: ToolSchema,
    args: dict[str, Any],
) -> dict[str, Any]:
    """Fill bound parameters from captured outputs; caller values always win.

    When several captures could fill the same parameter, the most recent
    one in execution order is used. A required parameter that is the target
    of a declared binding but has no capture and no caller value raises
    BindingSourceMissing.
    """
    rows = _bindings_targeting(catalog, target_name)
    if not rows:
        return dict(args)
    filled = dict(args)
    bound_params = {target_param for _, _, target_param, _ in rows}
    for target_param in sorted(bound_params):
        if target_param in filled:
            continue  # explicit argument beats any binding
        candidates = {
            (source_tool, source_path)
            for source_tool, source_path, param, _ in rows
            if param == target_param
        }
        chosen_value = None
        found_any = False
        # Walk the global capture log newest-first; first hit wins.
        for server_id, bare_tool, source_path, value in reversed(frame.capture_log):
            namespaced = f"{server_id}.{bare_tool}"
            for source_tool, wanted_path in candidates:
                if wanted_path != source_path:
                    continue
                if namespaced == source_tool or source_tool.endswith("." + bare_tool):
                    chosen_value = value
                    found_any = True
                    break
            if found_any:
                break
        if found_any:
            filled[target_param] = chosen_value
        elif target_param in tool.input_schema.required:
            raise BindingSourceMissing(target_name, target_param)
    return filled


# ---------------------------------------------------------------------------
# Approval gating
# ---------------------------------------------------------------------------


@dataclass
class PendingApproval:
    approval_id: str
    session_id: str
    tool_name: str
    action_type: str
    arguments: dict[str, Any]
    state: str = PENDING
    created_at: float = 0.0
    decided_at: float | None = None
    decided_by: str | None = None  # principal; absent while pending
    detail: dict[str, Any] = field(default_factory=dict)  # lint score, scan findings


class ApprovalQueue:
    """Thread-safe pending-call registry with exactly-once resolution.

    Approval ids are deterministic ("appr-0001", ...). Waiters block on a
    per-approval event. An optional journal appends one JSON line per event
    so a restarted gateway can reconstruct decided state.
    """

    def __init__(self, journal_path: str | None = None, clock: Callable[[], float] | None = None):
        self._lock = threading.Lock()
        self._items: dict[str, PendingApproval] = {}
        self._events: dict[str, threading.Event] = {}
        self._counter = 0
        self._journal_path = journal_path
        self._clock = clock or (lambda: 0.0)
        if journal_path:
            self._replay(journal_path)

    def _replay(self, path: str) -> None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except FileNotFoundError:
            return
        for line in lines:
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            if event["event"] == "submitted":
                item = PendingApproval(
                    approval_id=event["approval_id"],
                    session_id=event["session_id"],
                    tool_name=event["tool_name"],
                    action_type=event["action_type"],
                    arguments=event["arguments"],
                    created_at=event.get("created_at", 0.0),
                    detail=event.get("detail", {}),
                )
                self._items[item.approval_id] = item
                self._events[item.approval_id] = threading.Event()
                number = int(item.approval_id.rsplit("-", 1)[-1])
                self._counter = max(self._counter, number)
            elif event["event"] == "decided":
                item = self._items[event["approval_id"]]
                item.state = event["state"]
                item.decided_at = event.get("decided_at")
                item.decided_by = event.get("decided_by")
                self._events[item.approval_id].set()

    def _journal(self, record: dict[str, Any]) -> None:
        if not self._journal_path:
            return
        with open(self._journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def submit(
        self,
        session_id: str,
        tool_name: str,
        action_type: str,
        arguments: dict[str, Any],
        detail: dict[str, Any] | None = None,
    ) -> PendingApproval:
        with self._lock:
            self._counter += 1
            approval_id = f"appr-{self._counter:04d}"
            item = PendingApproval(
                approval_id=approval_id,
                session_id=session_id,
                tool_name=tool_name,
                action_type=action_type,
                arguments=dict(arguments),
                created_at=self._clock(),
                detail=dict(detail or {}),
            )
            self._items[approval_id] = item
            self._events[approval_id] = threading.Event()
            self._journal(
                {
                    "event": "submitted",
                    "approval_id": approval_id,
                    "session_id": session_id,
                    "tool_name": tool_name,
                    "action_type": action_type,
                    "arguments": item.arguments,
                    "created_at": item.created_at,
                    "detail": item.detail,
                }
            )
            return item

    def resolve(
        self, approval_id: str, decision: str, principal: str = "operator"
    ) -> PendingApproval:
        """Move pending -> approved/denied exactly once; later calls raise."""
        if decision not in (APPROVED, DENIED):
            raise ToolgateError(f"decision must be approved or denied: {decision!r}")
        with self._lock:
            item = self._items.get(approval_id)
            if item is None:
                raise UnknownApproval(approval_id)
            if item.state != PENDING:
                raise AlreadyDecided(approval_id, item.state)
            item.state = decision
            item.decided_at = self._clock()
            item.decided_by = principal
            self._journal(
                {
                    "event": "decided",
                    "approval_id": approval_id,
                    "state": decision,
                    "decided_at": item.decided_at,
                    "decided_by": principal,
                }
            )
            self._events[approval_id].set()
            return item

    def wait_for_decision(self, approval_id: str, timeout: float | None = None) -> str:
        """Block until decided; returns the final state, or "pending" on timeout."""
        with self._lock:
            if approval_id not in self._items:
                raise UnknownApproval(approval_id)
            event = self._events[approval_id]
        if not event.wait(timeout):
            return PENDING
        with self._lock:
            return self._items[approval_id].state

    def get(self, approval_id: str) -> PendingApproval:
        with self._lock:
            item = self._items.get(approval_id)
            if item is None:
                raise UnknownApproval(approval_id)
            return item

    def list(self, state: str | None = None) -> list[PendingApproval]:
        with self._lock:
            items = sorted(self._items.values(), key=lambda i: i.approval_id)
        if state is None:
            return items
        return [i for i in items if i.state == state]


@dataclass(frozen=True)
class GateDecision:
    outcome: str  # allow | pending
    approval_id: str | None = None


def gate(
    queue: ApprovalQueue,
    session_id: str,
    frame: SessionFrame,
    tool: ToolSchema,
    args: dict[str, Any],
    detail: dict[str, Any] | None = None,
    tool_name: str | None = None,
) -> GateDecision:
    """Reads pass immediately; writes and destructive calls join the queue.

    The frame argument is part of the contract (gating happens after
    dependency checks against it) though the decision itself only needs the
    classified action type. tool_name overrides the recorded name so a
    gateway can queue the namespaced name rather than the bare upstream one.
    """
    action = classify_action(tool)
    if action == ACTION_READ:
        return GateDecision(outcome=GATE_ALLOW)
    item = queue.submit(
        session_id=session_id,
        tool_name=tool_name or tool.name,
        action_type=action,
        arguments=args,
        detail=detail,
    )
    return GateDecision(outcome=GATE_PENDING, approval_id=item.approval_id)


# ---------------------------------------------------------------------------
# Description poisoning scan
# ---------------------------------------------------------------------------

POISON_PATTERNS_VERSION = 1

# (pattern_id, severity, compiled regex). The table is versioned so scan
# results can be traced back to the ruleset that produced them.
POISON_PATTERNS: list[tuple[str, str, re.Pattern[str]]] = [
    (
        "instruction_override",
        "error",
        re.compile(
            r"ignore\s+(?:all\s+)?previous|disregard\s+the\s+user"
            r"|do\s+not\s+tell|don'?t\s+tell"
            r"|forget\s+(?:your|all)\s+instructions",
            re.IGNORECASE,
        ),
    ),
    (
        "exfiltration",
        "error",
        re.compile(
            r"send\s+.{0,40}\s?to\s+https?://|forward\s+the\s+contents"
            r"|email\s+the\s+\w+\s+to"
            r"|(?:upload|post)\s+.{0,40}(?:credentials|secrets|keys)",
            re.IGNORECASE,
        ),
    ),
    (
        "self_elevation",
        "warning",
        re.compile(
            r"always\s+(?:choose|use|select)\s+this\s+tool"
            r"|prefer\s+this\s+tool\s+over"
            r"|this\s+tool\s+(?:must|should)\s+always\s+be\s+(?:used|chosen)",
            re.IGNORECASE,
        ),
    ),
]


@dataclass(frozen=True)
class PoisonFinding:
    pattern_id: str
    severity: str
    matched_text: str
    field: str  # "description" or "param:<name>"


def scan_description(tool: ToolSchema) -> list[PoisonFinding]:
    """Match the versioned pattern table against all descriptive text."""
    texts = [("description", tool.description)]
    for pname, param in tool.input_schema.parameters.items():
        texts.append((f"param:{pname}", param.description))
    gov = tool.governance
    if gov is not None and gov.summary:
        texts.append(("summary", gov.summary))
    findings = []
    for field_name, text in texts:
        for pattern_id, severity, pattern in POISON_PATTERNS:
            match = pattern.search(text)
            if match:
                findings.append(
                    PoisonFinding(
                        pattern_id=pattern_id,
                        severity=severity,
                        matched_text=match.group(0),
                        field=field_name,
                    )
                )
    return findings


# ---------------------------------------------------------------------------
# Failure mapping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureDisposition:
    code: str
    recovery: str
    alternative: str | None = None


def map_failure(tool: ToolSchema, code: str) -> FailureDisposition:
    """Map an upstream failure code to the declared recovery strategy.

    Codes with no declared mode come back as unclassified with abort, which
    is the safe default for an unknown failure.
    """
    if tool.governance is not None:
        for mode in tool.governance.failure_modes:
            if mode.code == code:
                return FailureDisposition(
                    code=mode.code, recovery=mode.recovery, alternative=mode.alternative
                )
    return FailureDisposition(code="unclassified", recovery=RECOVERY_ABORT)
