import json

import pytest
from hypothesis import given, strategies as st

from toolgate import rpc
from toolgate.rpc import (
    CapabilitySet,
    ClosedConnection,
    ConnectionState,
    ErrorPayload,
    InvalidRequest,
    ParseError,
    RpcDispatchError,
    RpcMessage,
    decode,
    encode,
    error_response,
    notification,
    request,
    response,
    step,
)
from conftest import load_json

GOLDEN = load_json("golden/wire.json")
GOLDEN_BY_NAME = {entry["name"]: entry for entry in GOLDEN}


def _msg_from_doc(doc):
    error = None
    if "error" in doc:
        e = doc["error"]
        error = ErrorPayload(code=e["code"], message=e["message"], data=e.get("data"))
    return RpcMessage(
        kind=doc["kind"],
        id=doc.get("id"),
        method=doc.get("method"),
        params=doc.get("params"),
        result=doc.get("result"),
        error=error,
    )


class TestGoldenWire:
    @pytest.mark.parametrize("name", sorted(GOLDEN_BY_NAME))
    def test_encode_byte_exact(self, name):
        entry = GOLDEN_BY_NAME[name]
        assert encode(_msg_from_doc(entry["message"])) == entry["wire"].encode("utf-8")

    @pytest.mark.parametrize("name", sorted(GOLDEN_BY_NAME))
    def test_decode_recovers_message(self, name):
        entry = GOLDEN_BY_NAME[name]
        assert decode(entry["wire"].encode("utf-8")) == _msg_from_doc(entry["message"])

    def test_corpus_covers_all_kinds(self):
        kinds = {e["message"]["kind"] for e in GOLDEN}
        assert kinds == {"request", "notification", "response", "error"}


class TestEncode:
    def test_top_level_key_order(self):
        wire = encode(request(9, "tools/call", {"name": "t"})).decode()
        assert wire.index('"jsonrpc"') < wire.index('"id"') < wire.index(
            '"method"'
        ) < wire.index('"params"')

    def test_nested_keys_sorted(self):
        wire = encode(request(1, "m", {"zulu": 1, "alpha": {"b": 1, "a": 2}})).decode()
        assert '"params":{"alpha":{"a":2,"b":1},"zulu":1}' in wire

    def test_no_whitespace(self):
        wire = encode(response(1, {"a": [1, 2], "b": "x"})).decode()
        assert " " not in wire

    def test_unicode_unescaped(self):
        wire = encode(request(1, "m", {"city": "Zürich"}))
        assert "Zürich".encode("utf-8") in wire

    def test_error_member_order(self):
        wire = encode(error_response(4, -32030, "boom", {"recovery": "retry"})).decode()
        body = wire[wire.index('"error"') :]
        assert body.index('"code"') < body.index('"message"') < body.index('"data"')

    def test_error_without_data_omits_member(self):
        wire = encode(error_response(4, -32601, "nope")).decode()
        assert '"data"' not in wire

    def test_null_id_error(self):
        wire = encode(error_response(None, -32700, "parse error")).decode()
        assert '"id":null' in wire

    def test_response_null_result_kept(self):
        wire = encode(response(3, None)).decode()
        assert '"result":null' in wire

    def test_deterministic(self):
        msg = request(1, "m", {"b": 1, "a": [True, None, 2.5]})
        assert encode(msg) == encode(msg)


class TestDecodeRejections:
    def test_invalid_utf8(self):
        with pytest.raises(ParseError):
            decode(b"\xff\xfe{}")

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            decode(b'{"jsonrpc":')

    def test_non_object(self):
        with pytest.raises(InvalidRequest):
            decode(b"[1,2,3]")

    def test_missing_version(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"id":1,"method":"m"}')

    def test_wrong_version(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"1.0","id":1,"method":"m"}')

    def test_empty_method(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1,"method":""}')

    def test_non_string_method(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1,"method":4}')

    def test_string_params(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1,"method":"m","params":"x"}')

    def test_bool_id(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":true,"method":"m"}')

    def test_null_id_request(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":null,"method":"m"}')

    def test_fractional_id(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1.5,"method":"m"}')

    def test_result_and_error_together(self):
        with pytest.raises(InvalidRequest):
            decode(
                b'{"jsonrpc":"2.0","id":1,"result":1,'
                b'"error":{"code":1,"message":"m"}}'
            )

    def test_response_without_id(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","result":1}')

    def test_error_without_id_member(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","error":{"code":1,"message":"m"}}')

    def test_error_with_null_id_accepted(self):
        msg = decode(b'{"jsonrpc":"2.0","id":null,"error":{"code":-32700,"message":"m"}}')
        assert msg.kind == "error"
        assert msg.id is None

    def test_error_code_must_be_int(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1,"error":{"code":"x","message":"m"}}')

    def test_bare_version_only(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0"}')

    def test_request_with_result_member(self):
        with pytest.raises(InvalidRequest):
            decode(b'{"jsonrpc":"2.0","id":1,"method":"m","result":1}')


class TestDecodeShapes:
    def test_id_omitted_means_notification(self):
        msg = decode(b'{"jsonrpc":"2.0","method":"notifications/initialized"}')
        assert msg.kind == "notification"

    def test_string_id_request(self):
        msg = decode(b'{"jsonrpc":"2.0","id":"abc","method":"m"}')
        assert msg.kind == "request"
        assert msg.id == "abc"

    def test_array_params(self):
        msg = decode(b'{"jsonrpc":"2.0","id":1,"method":"m","params":[1,2]}')
        assert msg.params == [1, 2]

    def test_extra_members_tolerated(self):
        msg = decode(b'{"jsonrpc":"2.0","id":1,"method":"m","_meta":{"x":1}}')
        assert msg.kind == "request"


class TestLifecycle:
    def _active(self):
        state = ConnectionState()
        step(state, request(1, "initialize", {"clientInfo": {"name": "t"}}))
        step(state, notification("notifications/initialized"))
        assert state.phase == rpc.STATE_ACTIVE
        return state

    def test_initialize_reply_shape(self):
        state = ConnectionState()
        reply = step(state, request(1, "initialize"))
        assert reply.kind == "response"
        assert reply.result == {
            "protocolVersion": "1.0",
            "capabilities": {
                "dynamicToolList": True,
                "elicitation": False,
                "resources": False,
                "prompts": False,
            },
        }
        assert state.phase == rpc.STATE_INITIALIZING

    def test_client_info_captured(self):
        state = ConnectionState()
        step(state, request(1, "initialize", {"clientInfo": {"name": "probe", "version": "2"}}))
        assert state.client_info == {"name": "probe", "version": "2"}

    def test_request_before_initialize(self):
        state = ConnectionState()
        reply = step(state, request(1, "tools/list"))
        assert reply.error.code == rpc.NOT_INITIALIZED
        assert reply.error.message == "server not initialized"
        assert state.phase == rpc.STATE_NEW

    def test_request_during_initializing(self):
        state = ConnectionState()
        step(state, request(1, "initialize"))
        reply = step(state, request(2, "tools/call"))
        assert reply.error.code == rpc.NOT_INITIALIZED

    def test_double_initialize_during_initializing(self):
        state = ConnectionState()
        step(state, request(1, "initialize"))
        reply = step(state, request(2, "initialize"))
        assert reply.error.code == rpc.INVALID_REQUEST
        assert reply.error.message == "connection already initialized"

    def test_initialize_when_active(self):
        state = self._active()
        reply = step(state, request(5, "initialize"))
        assert reply.error.code == rpc.INVALID_REQUEST
        assert state.phase == rpc.STATE_ACTIVE

    def test_initialized_notification_in_new_ignored(self):
        state = ConnectionState()
        assert step(state, notification("notifications/initialized")) is None
        assert state.phase == rpc.STATE_NEW

    def test_initialized_notification_when_active_ignored(self):
        state = self._active()
        assert step(state, notification("notifications/initialized")) is None
        assert state.phase == rpc.STATE_ACTIVE

    def test_unknown_notification_dropped_everywhere(self):
        for builder in (ConnectionState, lambda: self._active()):
            state = builder()
            phase = state.phase
            assert step(state, notification("notifications/whatever")) is None
            assert state.phase == phase

    def test_incoming_response_ignored(self):
        state = self._active()
        assert step(state, response(99, {"ok": True})) is None
        assert step(state, error_response(98, -32000, "x")) is None

    def test_dispatch_result_wrapped(self):
        state = self._active()
        reply = step(state, request(7, "tools/list"), dispatch=lambda m: {"tools": []})
        assert reply.kind == "response"
        assert reply.id == 7
        assert reply.result == {"tools": []}

    def test_dispatch_error_becomes_error_reply(self):
        state = self._active()

        def boom(msg):
            raise RpcDispatchError(rpc.UNKNOWN_TOOL, "no such tool", {"name": "x"})

        reply = step(state, request(7, "tools/call"), dispatch=boom)
        assert reply.error.code == rpc.UNKNOWN_TOOL
        assert reply.error.data == {"name": "x"}

    def test_unknown_method_when_active(self):
        state = self._active()
        reply = step(state, request(7, "resources/list"))
        assert reply.error.code == rpc.METHOD_NOT_FOUND

    def test_tool_method_without_dispatch(self):
        state = self._active()
        reply = step(state, request(7, "tools/list"))
        assert reply.error.code == rpc.METHOD_NOT_FOUND

    def test_closed_raises(self):
        state = ConnectionState(phase=rpc.STATE_CLOSED)
        with pytest.raises(ClosedConnection):
            step(state, request(1, "initialize"))

    def test_error_reply_ids_echo_request(self):
        state = ConnectionState()
        reply = step(state, request("alpha", "tools/list"))
        assert reply.id == "alpha"


# --- generated round-trip property -----------------------------------------

_json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**31), max_value=2**31)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=3)
    | st.dictionaries(st.text(max_size=8), children, max_size=3),
    max_leaves=10,
)
_ids = st.integers(min_value=0, max_value=2**31) | st.text(min_size=1, max_size=12)
_methods = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz/", min_size=1, max_size=20
)
_params = st.none() | st.dictionaries(st.text(max_size=8), _json_values, max_size=3)


@st.composite
def rpc_messages(draw):
    kind = draw(st.sampled_from(["request", "notification", "response", "error"]))
    if kind == "request":
        return request(draw(_ids), draw(_methods), draw(_params))
    if kind == "notification":
        return notification(draw(_methods), draw(_params))
    if kind == "response":
        return response(draw(_ids), draw(_json_values))
    return error_response(
        draw(st.none() | _ids),
        draw(st.integers(min_value=-32768, max_value=-32000)),
        draw(st.text(max_size=30)),
        draw(_json_values),
    )


@given(rpc_messages())
def test_generated_round_trip(msg):
    again = decode(encode(msg))
    assert again == msg


@given(rpc_messages())
def test_encode_is_stable_and_compact(msg):
    wire = encode(msg)
    assert wire == encode(decode(wire))
    # canonical form never contains insignificant whitespace
    doc = json.loads(wire)
    assert json.dumps(doc, separators=(",", ":"), ensure_ascii=False, sort_keys=True)
