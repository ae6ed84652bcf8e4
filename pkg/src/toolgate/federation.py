"""Federated catalog: multiple upstream tool servers behind one namespace.

Each upstream is registered through the standard connection handshake, its
tools are imported under the ``server_id.tool`` namespace, and discovery is
served in two tiers (summary entries by default, full documents on demand).
Routing a natural-language goal to candidate tools is a two-stage lexical
match: first narrow to servers whose category and summaries share vocabulary
with the goal, then rank that subset's tools by TF-IDF cosine similarity.
"""

from __future__ import annotations

import math
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Protocol

from .errors import ToolgateError
from .schema_model import (
    CatalogEntry,
    InvariantViolation,
    ToolSchema,
    parse_tool_schema,
    serialize_tool_schema,
    summarize,
)
from .tokens import MODE_STATIC, SessionUsage
from . import rpc


class NotAllowlisted(ToolgateError):
    def __init__(self, server_id: str):
        self.server_id = server_id
        super().__init__(f"upstream {server_id!r} is not allowlisted")


class UpstreamUnreachable(ToolgateError):
    def __init__(self, server_id: str, detail: str):
        self.server_id = server_id
        super().__init__(f"upstream {server_id!r} unreachable: {detail}")


class LifecycleFailure(ToolgateError):
    def __init__(self, server_id: str, detail: str):
        self.server_id = server_id
        super().__init__(f"upstream {server_id!r} handshake failed: {detail}")


class DuplicateServer(ToolgateError):
    def __init__(self, server_id: str):
        self.server_id = server_id
        super().__init__(f"upstream {server_id!r} is already registered")


class UnknownToolName(ToolgateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown tool: {name}")


class Transport(Protocol):
    """Sends one request and returns the decoded reply message."""

    def send(self, msg: rpc.RpcMessage) -> rpc.RpcMessage | None: ...


@dataclass
class UpstreamConfig:
    server_id: str
    allowlisted: bool = True
    category: str | None = None  # catalog-entry category default for this server

    def __post_init__(self) -> None:
        if not self.server_id:
            raise InvariantViolation("server_id must be non-empty")
        # A dot in the id would make namespaced names ambiguous
        # ("a" + "b.c" collides with "a.b" + "c").
        if "." in self.server_id:
            raise InvariantViolation(
                f"server_id must not contain '.': {self.server_id!r}"
            )


@dataclass
class Upstream:
    config: UpstreamConfig
    transport: Transport
    tools: dict[str, ToolSchema] = field(default_factory=dict)  # bare names


@dataclass
class Catalog:
    """Immutable-snapshot view over all registered upstreams.

    Mutation happens by swapping whole dicts under the lock, so concurrent
    readers always see a consistent catalog.
    """

    upstreams: dict[str, Upstream] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def snapshot(self) -> dict[str, Upstream]:
        return self.upstreams

    def tools(self) -> dict[str, ToolSchema]:
        """All tools keyed by namespaced name, from one snapshot."""
        out: dict[str, ToolSchema] = {}
        for server_id, upstream in self.snapshot().items():
            for bare, tool in upstream.tools.items():
                out[f"{server_id}.{bare}"] = tool
        return out

    def resolve(self, name: str) -> tuple[str, str, ToolSchema]:
        """Split a namespaced name into (server_id, bare_name, schema)."""
        if "." not in name:
            raise UnknownToolName(name)
        server_id, bare = name.split(".", 1)
        upstream = self.snapshot().get(server_id)
        if upstream is None or bare not in upstream.tools:
            raise UnknownToolName(name)
        return server_id, bare, upstream.tools[bare]

    def _swap(self, upstreams: dict[str, Upstream]) -> None:
        self.upstreams = upstreams


def _handshake(transport: Transport, server_id: str) -> None:
    reply = transport.send(
        rpc.request(1, "initialize", {"clientInfo": {"name": "toolgate"}})
    )
    if reply is None or reply.kind != rpc.KIND_RESPONSE:
        detail = "no response to initialize"
        if reply is not None and reply.error is not None:
            detail = reply.error.message
        raise LifecycleFailure(server_id, detail)
    result = reply.result
    if not isinstance(result, dict) or "protocolVersion" not in result:
        raise LifecycleFailure(server_id, "initialize reply lacks protocolVersion")
    transport.send(rpc.notification("notifications/initialized"))


def _fetch_tools(transport: Transport, server_id: str) -> list[ToolSchema]:
    reply = transport.send(rpc.request(2, "tools/list"))
    if reply is None or reply.kind != rpc.KIND_RESPONSE:
        detail = "no response to tools/list"
        if reply is not None and reply.error is not None:
            detail = reply.error.message
        raise LifecycleFailure(server_id, detail)
    result = reply.result
    if not isinstance(result, dict) or not isinstance(result.get("tools"), list):
        raise LifecycleFailure(server_id, "tools/list reply lacks a tools array")
    return [parse_tool_schema(doc) for doc in result["tools"]]


def register_upstream(
    catalog: Catalog,
    config: UpstreamConfig,
    transport: Transport,
    enforce_allowlist: bool = True,
) -> int:
    """Handshake with an upstream and import its tools into the namespace.

    Returns the number of tools imported. The catalog is updated atomically;
    on any failure it is left untouched.
    """
    if enforce_allowlist and not config.allowlisted:
        raise NotAllowlisted(config.server_id)
    with catalog._lock:
        if config.server_id in catalog.upstreams:
            raise DuplicateServer(config.server_id)
        _handshake(transport, config.server_id)
        tools = _fetch_tools(transport, config.server_id)
        upstream = Upstream(
            config=config,
            transport=transport,
            tools={tool.name: tool for tool in tools},
        )
        next_upstreams = dict(catalog.upstreams)
        next_upstreams[config.server_id] = upstream
        catalog._swap(next_upstreams)
        return len(tools)


def refresh_upstream(catalog: Catalog, server_id: str) -> int:
    """Re-fetch one upstream's tool list; atomic swap, same guarantees."""
    with catalog._lock:
        upstream = catalog.upstreams.get(server_id)
        if upstream is None:
            raise UnknownToolName(server_id)
        tools = _fetch_tools(upstream.transport, server_id)
        next_upstreams = dict(catalog.upstreams)
        next_upstreams[server_id] = Upstream(
            config=upstream.config,
            transport=upstream.transport,
            tools={tool.name: tool for tool in tools},
        )
        catalog._swap(next_upstreams)
        return len(tools)


def _entry(catalog: Catalog, server_id: str, tool: ToolSchema) -> CatalogEntry:
    upstream = catalog.snapshot()[server_id]
    default_category = upstream.config.category or server_id
    namespaced = summarize(tool, default_category=default_category)
    return CatalogEntry(
        name=f"{server_id}.{tool.name}",
        category=namespaced.category,
        summary=namespaced.summary,
        action_type=namespaced.action_type,
    )


def list_tools(
    catalog: Catalog, usage: SessionUsage, tier: str = "summary"
) -> list[dict[str, Any]]:
    """Serve the discovery listing in the requested tier, recording usage.

    summary tier returns catalog entries; full tier returns complete
    documents and marks the session as statically served.
    """
    snapshot = catalog.snapshot()
    if tier == "full":
        usage.served_tier = MODE_STATIC
        docs = []
        for server_id in sorted(snapshot):
            for bare in sorted(snapshot[server_id].tools):
                doc = serialize_tool_schema(snapshot[server_id].tools[bare])
                doc["name"] = f"{server_id}.{bare}"
                docs.append(doc)
        return docs
    entries = []
    for server_id in sorted(snapshot):
        for bare in sorted(snapshot[server_id].tools):
            entry = _entry(catalog, server_id, snapshot[server_id].tools[bare])
            entries.append(
                {
                    "name": entry.name,
                    "category": entry.category,
                    "summary": entry.summary,
                    "actionType": entry.action_type,
                }
            )
    return entries


def expand_tool(catalog: Catalog, usage: SessionUsage, name: str) -> dict[str, Any]:
    """Serve one full tool document on demand, recording the expansion."""
    server_id, bare, tool = catalog.resolve(name)
    usage.record_expansion(name)
    doc = serialize_tool_schema(tool)
    doc["name"] = name
    return doc


# ---------------------------------------------------------------------------
# Two-stage lexical routing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _server_vocabulary(catalog: Catalog, server_id: str) -> set[str]:
    upstream = catalog.snapshot()[server_id]
    words: set[str] = set(tokenize(upstream.config.category or server_id))
    for tool in upstream.tools.values():
        entry = summarize(tool, default_category=server_id)
        words.update(tokenize(entry.summary))
        words.update(tokenize(entry.category))
    return words


def _tool_terms(name: str, tool: ToolSchema, category: str) -> list[str]:
    entry = summarize(tool, default_category=category)
    return tokenize(name) + tokenize(entry.summary) + tokenize(tool.description)


@dataclass(frozen=True)
class RouteResult:
    ranked: list[tuple[str, float]]  # (namespaced tool, cosine score), best first
    stage1_servers: list[str]  # surviving servers, best overlap first


def route(goal: str, catalog: Catalog, k: int = 5) -> RouteResult:
    """Rank catalog tools against a goal string.

    Stage 1 keeps servers whose vocabulary overlaps the goal's tokens (all
    servers survive when nothing overlaps, so stage 2 always has input).
    Stage 2 ranks the surviving tools by TF-IDF cosine against the goal; the
    IDF table is built over the whole catalog so scores are comparable
    across servers. Ties break lexicographically by tool name.
    """
    snapshot = catalog.snapshot()
    goal_tokens = tokenize(goal)
    goal_set = set(goal_tokens)

    overlaps: list[tuple[int, str]] = []
    for server_id in sorted(snapshot):
        overlap = len(goal_set & _server_vocabulary(catalog, server_id))
        overlaps.append((overlap, server_id))
    surviving = [sid for count, sid in overlaps if count > 0]
    if not surviving:
        surviving = [sid for _, sid in overlaps]
    stage1 = sorted(
        [(count, sid) for count, sid in overlaps if sid in set(surviving)],
        key=lambda pair: (-pair[0], pair[1]),
    )

    # Document frequency over the entire catalog, not just survivors, so a
    # term's rarity does not depend on the stage-1 cut.
    all_docs: dict[str, list[str]] = {}
    for server_id, upstream in snapshot.items():
        category = upstream.config.category or server_id
        for bare, tool in upstream.tools.items():
            name = f"{server_id}.{bare}"
            all_docs[name] = _tool_terms(name, tool, category)
    n_docs = len(all_docs)
    df: Counter[str] = Counter()
    for terms in all_docs.values():
        df.update(set(terms))

    def idf(term: str) -> float:
        return math.log((1 + n_docs) / (1 + df[term])) + 1.0

    def vectorize(terms: list[str]) -> dict[str, float]:
        counts = Counter(terms)
        return {term: count * idf(term) for term, count in counts.items()}

    def cosine(a: dict[str, float], b: dict[str, float]) -> float:
        shared = set(a) & set(b)
        if not shared:
            return 0.0
        dot = sum(a[t] * b[t] for t in shared)
        norm_a = math.sqrt(sum(v * v for v in a.values()))
        norm_b = math.sqrt(sum(v * v for v in b.values()))
        if norm_a == 0 or norm_b == 0:
            return 0.0
        return dot / (norm_a * norm_b)

    goal_vec = vectorize(goal_tokens)
    survivor_set = set(surviving)
    scored = [
        (name, cosine(goal_vec, vectorize(terms)))
        for name, terms in all_docs.items()
        if name.split(".", 1)[0] in survivor_set
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RouteResult(ranked=scored[:k], stage1_servers=[sid for _, sid in stage1])
