"""Context-cost accounting for tool catalogs.

Compares the static regime (every full tool document enters the context up
front) against the progressive regime (cheap discovery entries up front,
full documents fetched on demand). Token costs use a character-count
estimator so the arithmetic is deterministic and model-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .schema_model import ToolSchema, entry_to_doc, summarize

MODE_STATIC = "static"
MODE_PROGRESSIVE = "progressive"


def estimate_tokens(text: str) -> int:
    """ceil(len/4): the standard rough cut of characters per token."""
    return math.ceil(len(text) / 4)


def _doc_text(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class SessionUsage:
    """What a session actually consumed from the catalog."""

    served_tier: str = MODE_PROGRESSIVE
    expansions: list[str] = field(default_factory=list)  # namespaced tool names, in order

    def record_expansion(self, name: str) -> None:
        self.expansions.append(name)


@dataclass(frozen=True)
class TokenReport:
    mode: str
    catalog_tokens: int  # what entered the context up front
    expansion_tokens: int  # full documents fetched on demand
    extra_round_trips: int  # one per expansion
    static_total: int  # cost had every full document been loaded up front
    progressive_total: int  # catalog + expansions under the progressive regime

    @property
    def total(self) -> int:
        if self.mode == MODE_STATIC:
            return self.static_total
        return self.progressive_total

    @property
    def reduction(self) -> float:
        """Fraction of the static up-front cost avoided by progressive serving."""
        if self.static_total == 0:
            return 0.0
        return 1.0 - self.progressive_total / self.static_total


def tool_cost(tool: ToolSchema) -> int:
    from .schema_model import serialize_tool_schema

    return estimate_tokens(_doc_text(serialize_tool_schema(tool)))


def entry_cost(tool: ToolSchema, default_category: str = "general") -> int:
    return estimate_tokens(_doc_text(entry_to_doc(summarize(tool, default_category))))


def measure(tools: list[ToolSchema], usage: SessionUsage) -> TokenReport:
    """Account a session's context cost in both regimes.

    The static total is the up-front sum of all full documents. The
    progressive total is the discovery catalog plus each full document the
    session actually expanded; duplicate expansions are re-paid because the
    bytes re-enter the context each time.
    """
    static_total = sum(tool_cost(tool) for tool in tools)
    catalog_tokens = sum(entry_cost(tool) for tool in tools)
    by_name = {tool.name: tool for tool in tools}
    expansion_tokens = 0
    for name in usage.expansions:
        tool = by_name.get(name)
        if tool is not None:
            expansion_tokens += tool_cost(tool)
    if usage.served_tier == MODE_STATIC:
        return TokenReport(
            mode=MODE_STATIC,
            catalog_tokens=static_total,
            expansion_tokens=0,
            extra_round_trips=0,
            static_total=static_total,
            progressive_total=catalog_tokens + expansion_tokens,
        )
    return TokenReport(
        mode=MODE_PROGRESSIVE,
        catalog_tokens=catalog_tokens,
        expansion_tokens=expansion_tokens,
        extra_round_trips=len(usage.expansions),
        static_total=static_total,
        progressive_total=catalog_tokens + expansion_tokens,
    )
