"""Synthetic corpora for benchmarks: a large catalog for token accounting
and goal/distractor sets for routing accuracy.

Generation is seeded and fully deterministic. The token-benchmark corpus is
built so every full document is at least 25x the size of its discovery
entry, which is what makes a 90 percent progressive saving reachable at
moderate expansion rates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .schema_model import (
    GovernanceProfile,
    Parameter,
    ParameterSpec,
    ToolSchema,
)

# Vocabulary pools for synthetic servers. Ten domains, each with its own
# nouns so cross-server lexical overlap stays low.
_DOMAINS = [
    ("weather", ["forecast", "temperature", "humidity", "radar", "alert"]),
    ("flights", ["itinerary", "fare", "seat", "departure", "layover"]),
    ("hotels", ["room", "suite", "reservation", "amenity", "checkout"]),
    ("banking", ["balance", "transfer", "statement", "ledger", "account"]),
    ("media", ["playlist", "episode", "stream", "album", "subtitle"]),
    ("events", ["venue", "ticket", "lineup", "schedule", "registration"]),
    ("rideshare", ["pickup", "dropoff", "driver", "route", "surge"]),
    ("calendar", ["meeting", "invite", "reminder", "agenda", "timezone"]),
    ("commerce", ["cart", "checkout", "inventory", "shipment", "refund"]),
    ("support", ["ticket", "escalation", "transcript", "queue", "resolution"]),
]

_VERBS = ["get", "list", "search", "create", "update", "delete"]

_FILLER = (
    "The operation validates every supplied argument against the declared"
    " constraints before contacting the backing service, normalizes"
    " identifiers to their canonical form, and returns a structured record"
    " whose fields are stable across versions. Rate limits apply per API"
    " key and burst traffic is smoothed by a token bucket. Results are"
    " cached for sixty seconds unless the request opts out. Pagination"
    " cursors remain valid for fifteen minutes. All timestamps are UTC in"
    " RFC 3339 format. Partial failures are reported per item rather than"
    " failing the whole batch."
)


@dataclass
class GeneratedServer:
    server_id: str
    category: str
    tools: list[ToolSchema] = field(default_factory=list)


def _long_param_description(rng: random.Random, noun: str, index: int) -> str:
    sentences = [
        f"The {noun} identifier used to scope this request, case sensitive.",
        "Must match the canonical form returned by the corresponding list"
        " operation; free-text aliases are not resolved.",
        "When omitted the service default applies, which may differ per"
        " region and account tier.",
    ]
    rng.shuffle(sentences)
    return f"Parameter {index}: " + " ".join(sentences)


def make_benchmark_corpus(
    n_servers: int = 10, tools_per_server: int = 20, seed: int = 7
) -> list[GeneratedServer]:
    """Build the token-accounting benchmark catalog.

    Defaults produce 200 tools across 10 servers, roughly 8 parameters per
    tool with verbose descriptions. Every tool carries a short governance
    summary so the discovery tier stays cheap.
    """
    rng = random.Random(seed)
    servers = []
    for s in range(n_servers):
        domain, nouns = _DOMAINS[s % len(_DOMAINS)]
        server_id = f"{domain}{s}" if s >= len(_DOMAINS) else domain
        tools = []
        for t in range(tools_per_server):
            verb = _VERBS[t % len(_VERBS)]
            noun = nouns[t % len(nouns)]
            name = f"{verb}_{noun}_{t}"
            parameters: dict[str, Parameter] = {}
            required = []
            n_params = 8
            for p in range(n_params):
                pname = f"{noun}_field_{p}"
                parameters[pname] = Parameter(
                    kind="text",
                    description=_long_param_description(rng, noun, p),
                )
                if p < 2:
                    required.append(pname)
            description = (
                f"{verb.capitalize()} the {noun} records for the {domain} service. "
                + _FILLER
            )
            summary = f"{verb.capitalize()} {noun} records"[:140]
            action = "read" if verb in ("get", "list", "search") else "write"
            if verb == "delete":
                action = "destructive"
            tools.append(
                ToolSchema(
                    name=name,
                    description=description,
                    input_schema=ParameterSpec(parameters=parameters, required=required),
                    governance=GovernanceProfile(
                        action_type=action,
                        summary=summary,
                        category=domain,
                    ),
                )
            )
        servers.append(GeneratedServer(server_id=server_id, category=domain, tools=tools))
    return servers


@dataclass(frozen=True)
class RoutingScenario:
    goal: str
    target: str  # namespaced tool name expected at rank 1
    catalog_servers: list[GeneratedServer]


def make_routing_scenarios(n_scenarios: int = 50, seed: int = 11) -> list[RoutingScenario]:
    """Goal/distractor scenarios for routing accuracy.

    Each scenario has one target tool sharing at least three distinctive
    terms with the goal, and nineteen distractors that share at most one
    generic term, spread over three servers so both router stages do work.
    """
    rng = random.Random(seed)
    # Distinctive trigram pools per scenario, disjoint from distractor text.
    distinctive = [
        ["quarterly", "dividend", "reinvestment"],
        ["glacier", "crevasse", "traverse"],
        ["sourdough", "fermentation", "hydration"],
        ["telescope", "collimation", "eyepiece"],
        ["marathon", "pacing", "splits"],
        ["orchid", "repotting", "substrate"],
        ["kayak", "portage", "rapids"],
        ["vintage", "typewriter", "ribbon"],
        ["beehive", "pollination", "apiary"],
        ["ceramic", "glaze", "kiln"],
    ]
    scenarios = []
    for i in range(n_scenarios):
        terms = distinctive[i % len(distinctive)]
        suffix = i // len(distinctive)
        # Make repeated use of a pool still unique per scenario.
        terms = [f"{t}{suffix}" if suffix else t for t in terms]
        target_name = f"manage_{terms[0]}"
        target = ToolSchema(
            name=target_name,
            description=(
                f"Handles {terms[0]} workflows including {terms[1]} tracking and"
                f" {terms[2]} planning for registered users of the service."
            ),
            governance=GovernanceProfile(
                action_type="read",
                summary=f"Handle {terms[0]} {terms[1]} {terms[2]} workflows",
                category="special",
            ),
        )
        distractors = []
        for d in range(19):
            domain, nouns = _DOMAINS[d % len(_DOMAINS)]
            noun = nouns[(d + i) % len(nouns)]
            distractors.append(
                ToolSchema(
                    name=f"generic_{domain}_{d}",
                    description=(
                        f"Performs routine {noun} operations for the {domain}"
                        " service with standard pagination and filtering."
                    ),
                    governance=GovernanceProfile(
                        action_type="read",
                        summary=f"Routine {noun} operations",
                        category=domain,
                    ),
                )
            )
        rng.shuffle(distractors)
        # Target lives on its own server; distractors spread over two servers.
        half = len(distractors) // 2
        servers = [
            GeneratedServer(server_id="special", category="special", tools=[target]),
            GeneratedServer(
                server_id="misc1", category="general", tools=distractors[:half]
            ),
            GeneratedServer(
                server_id="misc2", category="general", tools=distractors[half:]
            ),
        ]
        goal = (
            f"I need to plan my {terms[0]} {terms[1]} and review the {terms[2]}"
            " details for next month"
        )
        scenarios.append(
            RoutingScenario(
                goal=goal, target=f"special.{target_name}", catalog_servers=servers
            )
        )
    return scenarios
