"""Schema data model: governed tool definitions and dialogue-service schemas.

Covers parsing/serialization of two JSON document families, the
service-intent to tool conversion, discovery-tier summaries, and argument
validation against declared parameter kinds.

Tool documents use the conventional field names ``name`` / ``description`` /
``inputSchema``; the governance extension lives under the reserved top-level
key ``x-gov`` so consumers that do not know about it can ignore it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import ToolgateError

ACTION_READ = "read"
ACTION_WRITE = "write"
ACTION_DESTRUCTIVE = "destructive"
ACTION_TYPES = (ACTION_READ, ACTION_WRITE, ACTION_DESTRUCTIVE)

RECOVERY_RETRY = "retry"
RECOVERY_ALTERNATIVE = "alternative_tool"
RECOVERY_ASK_USER = "ask_user"
RECOVERY_ABORT = "abort"
RECOVERIES = (RECOVERY_RETRY, RECOVERY_ALTERNATIVE, RECOVERY_ASK_USER, RECOVERY_ABORT)

KIND_TEXT = "text"
KIND_INTEGER = "integer"
KIND_NUMBER = "number"
KIND_FLAG = "flag"
KIND_ENUM = "enumeration"
VALUE_KINDS = (KIND_TEXT, KIND_INTEGER, KIND_NUMBER, KIND_FLAG, KIND_ENUM)

SUMMARY_BUDGET = 140  # characters; discovery-tier entries must stay cheap

# Name-prefix fallback used when a tool declares no explicit action type.
# Unknown prefixes classify as write: over-gating beats under-gating.
_PREFIX_ACTIONS = (
    (("get_", "list_", "read_", "search_"), ACTION_READ),
    (("create_", "update_", "set_", "post_"), ACTION_WRITE),
    (("delete_", "remove_", "drop_", "clear_"), ACTION_DESTRUCTIVE),
)


class MalformedDocument(ToolgateError):
    """Document is not well-formed JSON or not the expected shape."""


class MissingField(ToolgateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing required field: {name}")


class InvariantViolation(ToolgateError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


class MissingRequired(ToolgateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing required argument: {name}")


class KindMismatch(ToolgateError):
    def __init__(self, name: str, expected: str, value: Any):
        self.name = name
        self.expected = expected
        self.value = value
        super().__init__(f"argument {name!r} does not match kind {expected}: {value!r}")


class EnumViolation(ToolgateError):
    def __init__(self, name: str, value: Any, allowed: tuple[str, ...]):
        self.name = name
        self.value = value
        self.allowed = allowed
        super().__init__(f"argument {name!r} = {value!r} not in enum {list(allowed)}")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class Parameter:
    """One declared input to a tool."""

    kind: str
    description: str = ""
    enum_values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in VALUE_KINDS:
            raise InvariantViolation(f"unknown value kind: {self.kind!r}")
        if self.kind == KIND_ENUM and not self.enum_values:
            raise InvariantViolation("enumeration parameter declares no enum values")
        if self.kind != KIND_ENUM and self.enum_values:
            raise InvariantViolation(f"{self.kind} parameter must not carry enum values")


@dataclass
class ParameterSpec:
    parameters: dict[str, Parameter] = field(default_factory=dict)
    required: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name in self.required:
            if name not in self.parameters:
                raise InvariantViolation(f"required parameter {name!r} is not declared")


@dataclass
class FailureMode:
    code: str
    condition: str
    recovery: str
    alternative: str | None = None

    def __post_init__(self) -> None:
        if self.recovery not in RECOVERIES:
            raise InvariantViolation(f"unknown recovery strategy: {self.recovery!r}")
        if (self.recovery == RECOVERY_ALTERNATIVE) != (self.alternative is not None):
            raise InvariantViolation(
                "alternative must be present exactly when recovery is alternative_tool"
            )


@dataclass
class Binding:
    """Declares that an output field of this tool feeds a parameter elsewhere."""

    source_path: str
    target_tool: str
    target_param: str


@dataclass
class GovernanceProfile:
    """Governance extension: action boundary, disclosure tier, relationships.

    ``action_type`` may be None when a document carries a partial extension;
    lint flags that, and classification falls back to name prefixes.
    """

    action_type: str | None = None
    summary: str | None = None
    category: str | None = None
    failure_modes: list[FailureMode] = field(default_factory=list)
    requires: list[str] = field(default_factory=list)
    bindings: list[Binding] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.action_type is not None and self.action_type not in ACTION_TYPES:
            raise InvariantViolation(f"unknown action type: {self.action_type!r}")
        if self.summary is not None and len(self.summary) > SUMMARY_BUDGET:
            raise InvariantViolation(
                f"summary exceeds {SUMMARY_BUDGET} characters ({len(self.summary)})"
            )
        if len(set(self.requires)) != len(self.requires):
            raise InvariantViolation("requires contains duplicates")
        seen: set[str] = set()
        for mode in self.failure_modes:
            if mode.code in seen:
                raise InvariantViolation(f"duplicate failure mode code: {mode.code!r}")
            seen.add(mode.code)


@dataclass
class ToolSchema:
    name: str
    description: str
    input_schema: ParameterSpec = field(default_factory=ParameterSpec)
    governance: GovernanceProfile | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise MissingField("name")
        if self.governance is not None and self.name in self.governance.requires:
            raise InvariantViolation(f"tool {self.name!r} requires itself")


@dataclass(frozen=True)
class CatalogEntry:
    """Discovery-tier view of a tool: no parameter details, ever."""

    name: str
    category: str
    summary: str
    action_type: str


@dataclass
class SgdSlot:
    name: str
    description: str
    is_categorical: bool = False
    slot_values: list[str] = field(default_factory=list)
    kind: str | None = None  # explicit kind annotation for numeric slots

    def __post_init__(self) -> None:
        if self.is_categorical != bool(self.slot_values):
            raise InvariantViolation(
                f"slot {self.name!r}: is_categorical must match slot_values presence"
            )
        if self.kind is not None and self.kind not in VALUE_KINDS:
            raise InvariantViolation(f"slot {self.name!r}: unknown kind {self.kind!r}")


@dataclass
class SgdIntent:
    name: str
    description: str
    is_transactional: bool
    required_slots: list[str] = field(default_factory=list)
    optional_slots: dict[str, Any] = field(default_factory=dict)
    slots: list[SgdSlot] = field(default_factory=list)

    def __post_init__(self) -> None:
        declared = {slot.name for slot in self.slots}
        if len(declared) != len(self.slots):
            raise InvariantViolation(f"intent {self.name!r}: duplicate slot names")
        for slot_name in list(self.required_slots) + list(self.optional_slots):
            if slot_name not in declared:
                raise InvariantViolation(
                    f"intent {self.name!r}: slot {slot_name!r} is not declared"
                )
        overlap = set(self.required_slots) & set(self.optional_slots)
        if overlap:
            raise InvariantViolation(
                f"intent {self.name!r}: slots both required and optional: {sorted(overlap)}"
            )


@dataclass
class SgdServiceSchema:
    service_name: str
    intents: list[SgdIntent] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.service_name:
            raise MissingField("service_name")
        names = [intent.name for intent in self.intents]
        if len(set(names)) != len(names):
            raise InvariantViolation(
                f"service {self.service_name!r}: duplicate intent names"
            )


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------

_KIND_TO_JSON = {
    KIND_TEXT: "string",
    KIND_INTEGER: "integer",
    KIND_NUMBER: "number",
    KIND_FLAG: "boolean",
    KIND_ENUM: "string",
}
_JSON_TO_KIND = {
    "string": KIND_TEXT,
    "integer": KIND_INTEGER,
    "number": KIND_NUMBER,
    "boolean": KIND_FLAG,
}


def _load_document(document: str | bytes | Mapping[str, Any]) -> dict[str, Any]:
    if isinstance(document, Mapping):
        return dict(document)
    try:
        parsed = json.loads(document)
    except (ValueError, TypeError) as exc:
        raise MalformedDocument(f"document is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise MalformedDocument("document must be a JSON object")
    return parsed


def _require_str(doc: Mapping[str, Any], key: str) -> str:
    value = doc.get(key)
    if value is None or value == "":
        raise MissingField(key)
    if not isinstance(value, str):
        raise MalformedDocument(f"field {key!r} must be a string")
    return value


def _parse_parameter(name: str, doc: Any) -> Parameter:
    if not isinstance(doc, dict):
        raise MalformedDocument(f"parameter {name!r} must be an object")
    json_type = doc.get("type", "string")
    enum_values = doc.get("enum")
    if enum_values is not None:
        if not isinstance(enum_values, list) or not all(
            isinstance(v, str) for v in enum_values
        ):
            raise MalformedDocument(f"parameter {name!r}: enum must be a list of strings")
        return Parameter(
            kind=KIND_ENUM,
            description=str(doc.get("description", "")),
            enum_values=tuple(enum_values),
        )
    kind = _JSON_TO_KIND.get(json_type)
    if kind is None:
        raise MalformedDocument(f"parameter {name!r}: unsupported type {json_type!r}")
    return Parameter(kind=kind, description=str(doc.get("description", "")))


def parse_tool_schema(document: str | bytes | Mapping[str, Any]) -> ToolSchema:
    """Parse a tool document (JSON text or mapping) into a ToolSchema.

    Raises MalformedDocument / MissingField / InvariantViolation.
    """
    doc = _load_document(document)
    name = _require_str(doc, "name")
    if "description" not in doc:
        raise MissingField("description")
    description = doc["description"]
    if not isinstance(description, str):
        raise MalformedDocument("field 'description' must be a string")

    input_schema = doc.get("inputSchema", {})
    if not isinstance(input_schema, dict):
        raise MalformedDocument("inputSchema must be an object")
    properties = input_schema.get("properties", {})
    if not isinstance(properties, dict):
        raise MalformedDocument("inputSchema.properties must be an object")
    parameters = {
        pname: _parse_parameter(pname, pdoc) for pname, pdoc in properties.items()
    }
    required = input_schema.get("required", [])
    if not isinstance(required, list) or not all(isinstance(r, str) for r in required):
        raise MalformedDocument("inputSchema.required must be a list of names")

    governance = None
    if "x-gov" in doc:
        governance = _parse_governance(doc["x-gov"])

    return ToolSchema(
        name=name,
        description=description,
        input_schema=ParameterSpec(parameters=parameters, required=list(required)),
        governance=governance,
    )


def _parse_governance(doc: Any) -> GovernanceProfile:
    if not isinstance(doc, dict):
        raise MalformedDocument("x-gov must be an object")
    failure_modes = []
    for mode_doc in doc.get("failureModes", []):
        if not isinstance(mode_doc, dict):
            raise MalformedDocument("x-gov.failureModes entries must be objects")
        failure_modes.append(
            FailureMode(
                code=_require_str(mode_doc, "code"),
                condition=str(mode_doc.get("condition", "")),
                recovery=_require_str(mode_doc, "recovery"),
                alternative=mode_doc.get("alternative"),
            )
        )
    bindings = []
    for binding_doc in doc.get("bindings", []):
        if not isinstance(binding_doc, dict):
            raise MalformedDocument("x-gov.bindings entries must be objects")
        bindings.append(
            Binding(
                source_path=_require_str(binding_doc, "sourcePath"),
                target_tool=_require_str(binding_doc, "targetTool"),
                target_param=_require_str(binding_doc, "targetParam"),
            )
        )
    requires = doc.get("requires", [])
    if not isinstance(requires, list) or not all(isinstance(r, str) for r in requires):
        raise MalformedDocument("x-gov.requires must be a list of tool names")
    return GovernanceProfile(
        action_type=doc.get("actionType"),
        summary=doc.get("summary"),
        category=doc.get("category"),
        failure_modes=failure_modes,
        requires=list(requires),
        bindings=bindings,
    )


def serialize_tool_schema(tool: ToolSchema) -> dict[str, Any]:
    """Serialize a ToolSchema into its JSON document form (round-trip stable)."""
    properties: dict[str, Any] = {}
    for pname, param in tool.input_schema.parameters.items():
        pdoc: dict[str, Any] = {"type": _KIND_TO_JSON[param.kind]}
        if param.description:
            pdoc["description"] = param.description
        if param.kind == KIND_ENUM:
            pdoc["enum"] = list(param.enum_values)
        properties[pname] = pdoc
    doc: dict[str, Any] = {
        "name": tool.name,
        "description": tool.description,
        "inputSchema": {
            "type": "object",
            "properties": properties,
            "required": list(tool.input_schema.required),
        },
    }
    if tool.governance is not None:
        doc["x-gov"] = _serialize_governance(tool.governance)
    return doc


def _serialize_governance(gov: GovernanceProfile) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if gov.action_type is not None:
        doc["actionType"] = gov.action_type
    if gov.summary is not None:
        doc["summary"] = gov.summary
    if gov.category is not None:
        doc["category"] = gov.category
    if gov.failure_modes:
        doc["failureModes"] = [
            {
                "code": m.code,
                "condition": m.condition,
                "recovery": m.recovery,
                **({"alternative": m.alternative} if m.alternative else {}),
            }
            for m in gov.failure_modes
        ]
    if gov.requires:
        doc["requires"] = list(gov.requires)
    if gov.bindings:
        doc["bindings"] = [
            {
                "sourcePath": b.source_path,
                "targetTool": b.target_tool,
                "targetParam": b.target_param,
            }
            for b in gov.bindings
        ]
    return doc


def parse_sgd_schema(document: str | bytes | Mapping[str, Any]) -> SgdServiceSchema:
    """Parse a service document using the schema-guided dialogue field names."""
    doc = _load_document(document)
    service_name = _require_str(doc, "service_name")
    intents_doc = doc.get("intents", [])
    if not isinstance(intents_doc, list):
        raise MalformedDocument("intents must be a list")
    intents = []
    for intent_doc in intents_doc:
        if not isinstance(intent_doc, dict):
            raise MalformedDocument("intent entries must be objects")
        intents.append(_parse_intent(intent_doc))
    return SgdServiceSchema(service_name=service_name, intents=intents)


def _parse_intent(doc: Mapping[str, Any]) -> SgdIntent:
    slots = []
    for slot_doc in doc.get("slots", []):
        if not isinstance(slot_doc, dict):
            raise MalformedDocument("slot entries must be objects")
        slots.append(
            SgdSlot(
                name=_require_str(slot_doc, "name"),
                description=str(slot_doc.get("description", "")),
                is_categorical=bool(slot_doc.get("is_categorical", False)),
                slot_values=list(slot_doc.get("slot_values", [])),
                kind=slot_doc.get("kind"),
            )
        )
    if "is_transactional" not in doc:
        raise MissingField("is_transactional")
    optional = doc.get("optional_slots", {})
    if not isinstance(optional, dict):
        raise MalformedDocument("optional_slots must be a map of name to default")
    return SgdIntent(
        name=_require_str(doc, "name"),
        description=_require_str(doc, "description"),
        is_transactional=bool(doc["is_transactional"]),
        required_slots=list(doc.get("required_slots", [])),
        optional_slots=dict(optional),
        slots=slots,
    )


def serialize_sgd_schema(service: SgdServiceSchema) -> dict[str, Any]:
    return {
        "service_name": service.service_name,
        "intents": [
            {
                "name": intent.name,
                "description": intent.description,
                "is_transactional": intent.is_transactional,
                "required_slots": list(intent.required_slots),
                "optional_slots": dict(intent.optional_slots),
                "slots": [
                    {
                        "name": slot.name,
                        "description": slot.description,
                        "is_categorical": slot.is_categorical,
                        "slot_values": list(slot.slot_values),
                        **({"kind": slot.kind} if slot.kind else {}),
                    }
                    for slot in intent.slots
                ],
            }
            for intent in service.intents
        ],
    }


# ---------------------------------------------------------------------------
# Service-to-tool conversion
# ---------------------------------------------------------------------------


def sgd_to_mcp(service: SgdServiceSchema) -> list[ToolSchema]:
    """Convert every intent of a service into a governed tool definition.

    The intent description is copied verbatim, required slots become required
    parameters, categorical slot values become enumeration constraints, and
    the transactional flag maps to the write action type (destructive is
    never inferred; it must be declared explicitly).
    """
    tools = []
    for intent in service.intents:
        parameters: dict[str, Parameter] = {}
        for slot in intent.slots:
            if slot.is_categorical:
                parameters[slot.name] = Parameter(
                    kind=KIND_ENUM,
                    description=slot.description,
                    enum_values=tuple(slot.slot_values),
                )
            else:
                parameters[slot.name] = Parameter(
                    kind=slot.kind or KIND_TEXT, description=slot.description
                )
        tools.append(
            ToolSchema(
                name=intent.name,
                description=intent.description,
                input_schema=ParameterSpec(
                    parameters=parameters, required=list(intent.required_slots)
                ),
                governance=GovernanceProfile(
                    action_type=ACTION_WRITE if intent.is_transactional else ACTION_READ,
                    category=service.service_name,
                ),
            )
        )
    return tools


# ---------------------------------------------------------------------------
# Discovery summaries and action classification
# ---------------------------------------------------------------------------


def classify_action(tool: ToolSchema) -> str:
    """Effective action type: declared when present, else name-prefix fallback."""
    if tool.governance is not None and tool.governance.action_type is not None:
        return tool.governance.action_type
    bare = tool.name.rsplit(".", 1)[-1].lower()
    for prefixes, action in _PREFIX_ACTIONS:
        if bare.startswith(prefixes):
            return action
    return ACTION_WRITE


_SENTENCE_END = re.compile(r"\.(?:\s|$)")


def first_sentence(text: str) -> str:
    match = _SENTENCE_END.search(text)
    if match:
        return text[: match.start() + 1]
    return text


def summarize(tool: ToolSchema, default_category: str = "general") -> CatalogEntry:
    """Build the discovery-tier entry for a tool.

    Uses the declared one-line summary when present, otherwise the first
    sentence of the description truncated to the summary budget. The entry
    never includes parameter details.
    """
    gov = tool.governance
    if gov is not None and gov.summary is not None:
        summary = gov.summary
    else:
        summary = first_sentence(tool.description).strip()
        if len(summary) > SUMMARY_BUDGET:
            summary = summary[: SUMMARY_BUDGET - 1] + "…"
    category = default_category
    if gov is not None and gov.category:
        category = gov.category
    return CatalogEntry(
        name=tool.name,
        category=category,
        summary=summary,
        action_type=classify_action(tool),
    )


def entry_to_doc(entry: CatalogEntry) -> dict[str, Any]:
    return {
        "name": entry.name,
        "category": entry.category,
        "summary": entry.summary,
        "actionType": entry.action_type,
    }


# ---------------------------------------------------------------------------
# Argument validation
# ---------------------------------------------------------------------------


def _kind_matches(kind: str, value: Any) -> bool:
    if kind == KIND_TEXT:
        return isinstance(value, str)
    if kind == KIND_INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == KIND_NUMBER:
        if isinstance(value, bool):
            return False
        return isinstance(value, (int, float)) and math.isfinite(value)
    if kind == KIND_FLAG:
        return isinstance(value, bool)
    if kind == KIND_ENUM:
        return isinstance(value, str)
    return False


def validate_arguments(tool: ToolSchema, args: Mapping[str, Any]) -> dict[str, Any]:
    """Check required presence, kind conformance, and enum membership.

    Returns a plain dict of the validated arguments. Arguments for
    undeclared parameters are passed through untouched.
    """
    spec = tool.input_schema
    for name in spec.required:
        if name not in args:
            raise MissingRequired(name)
    for name, value in args.items():
        param = spec.parameters.get(name)
        if param is None:
            continue
        if not _kind_matches(param.kind, value):
            raise KindMismatch(name, param.kind, value)
        if param.kind == KIND_ENUM and value not in param.enum_values:
            raise EnumViolation(name, value, param.enum_values)
    return dict(args)
