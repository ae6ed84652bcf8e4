"""JSON-RPC 2.0 message codec and connection lifecycle state machine.

Encoding is canonical: a fixed top-level key order and compact separators,
so the same message always produces the same bytes. The lifecycle follows
the initialize handshake: a connection starts uninitialized, the client
sends initialize, the server replies with its capabilities, the client
confirms with notifications/initialized, and only then is the connection
active and tool traffic allowed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ToolgateError

PROTOCOL_VERSION = "1.0"

# JSON-RPC error codes. Negative five-digit codes below -32000 are reserved
# by the wire protocol; the -320xx range carries gateway-specific failures.
PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
NOT_INITIALIZED = -32002
UNKNOWN_TOOL = -32004
DENIED = -32010
APPROVAL_TIMEOUT = -32011
DEPENDENCY_UNMET = -32020
BINDING_UNSATISFIED = -32021
UPSTREAM_FAILURE = -32030

STATE_NEW = "new"
STATE_INITIALIZING = "initializing"
STATE_ACTIVE = "active"
STATE_CLOSED = "closed"

KIND_REQUEST = "request"
KIND_NOTIFICATION = "notification"
KIND_RESPONSE = "response"
KIND_ERROR = "error"


class RpcError(ToolgateError):
    """A protocol-level failure that maps to a JSON-RPC error reply."""

    def __init__(self, code: int, message: str, data: Any = None):
        self.code = code
        self.message = message
        self.data = data
        super().__init__(f"[{code}] {message}")


class ParseError(RpcError):
    def __init__(self, message: str, data: Any = None):
        super().__init__(PARSE_ERROR, message, data)


class InvalidRequest(RpcError):
    def __init__(self, message: str, data: Any = None):
        super().__init__(INVALID_REQUEST, message, data)


class ClosedConnection(ToolgateError):
    """Raised when a message is stepped through a closed connection."""


class RpcDispatchError(RpcError):
    """Raised by a dispatcher to turn a handler failure into an error reply."""


@dataclass(frozen=True)
class ErrorPayload:
    code: int
    message: str
    data: Any = None


@dataclass(frozen=True)
class RpcMessage:
    """One decoded wire message.

    kind determines which fields are meaningful: requests carry id+method,
    notifications carry method only, responses carry id+result, and errors
    carry id+error (id may be None only on a parse-error reply, where the
    offender's id is unknowable).
    """

    kind: str
    id: int | str | None = None
    method: str | None = None
    params: dict[str, Any] | list[Any] | None = None
    result: Any = None
    error: ErrorPayload | None = None


def request(
    id: int | str, method: str, params: dict[str, Any] | list[Any] | None = None
) -> RpcMessage:
    return RpcMessage(kind=KIND_REQUEST, id=id, method=method, params=params)


def notification(
    method: str, params: dict[str, Any] | list[Any] | None = None
) -> RpcMessage:
    return RpcMessage(kind=KIND_NOTIFICATION, method=method, params=params)


def response(id: int | str, result: Any) -> RpcMessage:
    return RpcMessage(kind=KIND_RESPONSE, id=id, result=result)


def error_response(
    id: int | str | None, code: int, message: str, data: Any = None
) -> RpcMessage:
    return RpcMessage(
        kind=KIND_ERROR, id=id, error=ErrorPayload(code=code, message=message, data=data)
    )


def _canonical_value(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def encode(msg: RpcMessage) -> bytes:
    """Encode a message to canonical UTF-8 bytes.

    Top-level keys appear in the fixed order jsonrpc, id, method, params,
    result, error; nested objects sort their keys. Equal messages always
    encode to equal bytes.
    """
    parts = ['"jsonrpc":"2.0"']
    if msg.kind in (KIND_REQUEST, KIND_RESPONSE) or (
        msg.kind == KIND_ERROR and msg.id is not None
    ):
        parts.append(f'"id":{_canonical_value(msg.id)}')
    elif msg.kind == KIND_ERROR:
        parts.append('"id":null')
    if msg.kind in (KIND_REQUEST, KIND_NOTIFICATION):
        parts.append(f'"method":{_canonical_value(msg.method)}')
        if msg.params is not None:
            parts.append(f'"params":{_canonical_value(msg.params)}')
    if msg.kind == KIND_RESPONSE:
        parts.append(f'"result":{_canonical_value(msg.result)}')
    if msg.kind == KIND_ERROR:
        err = msg.error
        assert err is not None
        error_obj: dict[str, Any] = {"code": err.code, "message": err.message}
        if err.data is not None:
            error_obj["data"] = err.data
        body = (
            f'"code":{_canonical_value(err.code)},'
            f'"message":{_canonical_value(err.message)}'
        )
        if err.data is not None:
            body += f',"data":{_canonical_value(err.data)}'
        parts.append('"error":{' + body + "}")
    return ("{" + ",".join(parts) + "}").encode("utf-8")


def _valid_id(value: Any) -> bool:
    # Booleans are ints in Python; the wire type must be a real number or string.
    return (isinstance(value, int) and not isinstance(value, bool)) or isinstance(
        value, str
    )


def decode(raw: bytes | str) -> RpcMessage:
    """Decode one wire message.

    Raises ParseError for byte-level problems and InvalidRequest for
    structurally wrong JSON-RPC (bad version tag, null or fractional ids,
    non-object/array params, result and error together).
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidRequest("message must be a JSON object")
    if doc.get("jsonrpc") != "2.0":
        raise InvalidRequest("missing or wrong jsonrpc version tag")

    has_method = "method" in doc
    has_result = "result" in doc
    has_error = "error" in doc
    has_id = "id" in doc

    if has_result and has_error:
        raise InvalidRequest("message carries both result and error")

    if has_method:
        method = doc["method"]
        if not isinstance(method, str) or not method:
            raise InvalidRequest("method must be a non-empty string")
        params = doc.get("params")
        if "params" in doc and not isinstance(params, (dict, list)):
            raise InvalidRequest("params must be an object or array")
        if has_result or has_error:
            raise InvalidRequest("request must not carry result or error")
        if has_id:
            if not _valid_id(doc["id"]):
                raise InvalidRequest("id must be an integer or string")
            return RpcMessage(
                kind=KIND_REQUEST, id=doc["id"], method=method, params=params
            )
        return RpcMessage(kind=KIND_NOTIFICATION, method=method, params=params)

    if has_result:
        if not has_id or not _valid_id(doc["id"]):
            raise InvalidRequest("response must carry an integer or string id")
        return RpcMessage(kind=KIND_RESPONSE, id=doc["id"], result=doc["result"])

    if has_error:
        err = doc["error"]
        if not isinstance(err, dict) or not isinstance(err.get("code"), int):
            raise InvalidRequest("error must be an object with an integer code")
        if not isinstance(err.get("message"), str):
            raise InvalidRequest("error must carry a string message")
        if not has_id:
            raise InvalidRequest("error reply must carry an id member")
        # id:null is legal here and only here: a parse-error reply cannot
        # know the id of the message it rejects.
        if doc["id"] is not None and not _valid_id(doc["id"]):
            raise InvalidRequest("id must be an integer, string, or null")
        return RpcMessage(
            kind=KIND_ERROR,
            id=doc["id"],
            error=ErrorPayload(
                code=err["code"], message=err["message"], data=err.get("data")
            ),
        )

    raise InvalidRequest("message is neither request, notification, nor response")


# ---------------------------------------------------------------------------
# Connection lifecycle
# ---------------------------------------------------------------------------


@dataclass
class CapabilitySet:
    dynamic_tool_list: bool = True
    elicitation: bool = False
    resources: bool = False
    prompts: bool = False

    def to_doc(self) -> dict[str, Any]:
        return {
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": {
                "dynamicToolList": self.dynamic_tool_list,
                "elicitation": self.elicitation,
                "resources": self.resources,
                "prompts": self.prompts,
            },
        }


@dataclass
class ConnectionState:
    phase: str = STATE_NEW
    capabilities: CapabilitySet = field(default_factory=CapabilitySet)
    client_info: dict[str, Any] = field(default_factory=dict)


Dispatcher = Callable[[RpcMessage], Any]


def step(
    state: ConnectionState,
    msg: RpcMessage,
    dispatch: Dispatcher | None = None,
) -> RpcMessage | None:
    """Advance the lifecycle by one incoming message; return the reply, if any.

    Mutates state.phase in place. Requests before the handshake completes get
    a not-initialized error; a second initialize is an invalid request;
    out-of-phase notifications and all incoming responses are dropped.
    Dispatch handles tool traffic once active and may raise RpcDispatchError
    to produce an error reply.
    """
    if state.phase == STATE_CLOSED:
        raise ClosedConnection("connection is closed")

    if msg.kind in (KIND_RESPONSE, KIND_ERROR):
        # This side issues no outbound requests, so responses have no home.
        return None

    if msg.kind == KIND_NOTIFICATION:
        if msg.method == "notifications/initialized":
            if state.phase == STATE_INITIALIZING:
                state.phase = STATE_ACTIVE
            # In any other phase the confirmation is meaningless; drop it.
            return None
        # Unknown notifications are ignored by design.
        return None

    assert msg.kind == KIND_REQUEST
    assert msg.id is not None

    if msg.method == "initialize":
        if state.phase != STATE_NEW:
            return error_response(
                msg.id, INVALID_REQUEST, "connection already initialized"
            )
        if isinstance(msg.params, dict):
            info = msg.params.get("clientInfo")
            if isinstance(info, dict):
                state.client_info = info
        state.phase = STATE_INITIALIZING
        return response(msg.id, state.capabilities.to_doc())

    if state.phase != STATE_ACTIVE:
        return error_response(msg.id, NOT_INITIALIZED, "server not initialized")

    if msg.method in ("tools/list", "tools/describe", "tools/call"):
        if dispatch is None:
            return error_response(
                msg.id, METHOD_NOT_FOUND, f"no handler for {msg.method}"
            )
        try:
            result = dispatch(msg)
        except RpcDispatchError as exc:
            return error_response(msg.id, exc.code, exc.message, exc.data)
        return response(msg.id, result)

    return error_response(msg.id, METHOD_NOT_FOUND, f"unknown method: {msg.method}")
