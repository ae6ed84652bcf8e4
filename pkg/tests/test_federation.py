import json
import math
import threading

import pytest

from toolgate import rpc
from toolgate.federation import (
    Catalog,
    DuplicateServer,
    NotAllowlisted,
    UnknownToolName,
    UpstreamConfig,
    expand_tool,
    list_tools,
    refresh_upstream,
    register_upstream,
    route,
    tokenize,
)
from toolgate.mockserver import Fixture, InProcessTransport, MockServer
from toolgate.schema_model import InvariantViolation, parse_tool_schema
from toolgate.tokens import MODE_STATIC, SessionUsage
from oracles import brute_route_scores


def _tool(name, description, action="read", summary=None, params=()):
    doc = {
        "name": name,
        "description": description,
        "inputSchema": {
            "type": "object",
            "properties": {
                p: {"type": "string", "description": f"the {p} value to use"}
                for p in params
            },
            "required": [],
        },
        "x-gov": {"actionType": action},
    }
    if summary:
        doc["x-gov"]["summary"] = summary
    return doc


def _make_server(server_id, tool_docs, results=None):
    fixture = Fixture(
        server_id=server_id,
        tools=[parse_tool_schema(d) for d in tool_docs],
        results=results or {},
        failures={},
    )
    return MockServer(fixture)


def _register(catalog, server_id, tool_docs, category=None, allowlisted=True, enforce=True):
    server = _make_server(server_id, tool_docs)
    config = UpstreamConfig(
        server_id=server_id,
        allowlisted=allowlisted,
        category=category,
    )
    count = register_upstream(
        catalog, config, InProcessTransport(server), enforce_allowlist=enforce
    )
    return server, count


WEATHER_TOOLS = [
    _tool(
        "get_current_weather",
        "Retrieves current temperature and conditions for a specified location.",
        summary="Current weather for a location",
    ),
    _tool(
        "get_forecast",
        "Retrieves a multi-day weather forecast for a specified location.",
        summary="Multi-day weather forecast",
    ),
]

GITHUB_TOOLS = [
    _tool(
        "create_issue",
        "Creates an issue in the specified repository with a title and body.",
        action="write",
        summary="Creates a repository issue",
        params=("repo_slug", "issue_title"),
    ),
    _tool(
        "list_repos",
        "Lists repositories accessible to the authenticated account.",
        summary="Lists accessible repositories",
    ),
]


class TestUpstreamConfig:
    def test_dot_in_server_id_rejected(self):
        with pytest.raises(InvariantViolation):
            UpstreamConfig(server_id="a.b", allowlisted=True)

    def test_empty_server_id_rejected(self):
        with pytest.raises(InvariantViolation):
            UpstreamConfig(server_id="", allowlisted=True)


class TestRegistration:
    def test_register_imports_tools(self):
        catalog = Catalog()
        _, count = _register(catalog, "weather", WEATHER_TOOLS)
        assert count == 2
        assert set(catalog.tools()) == {
            "weather.get_current_weather",
            "weather.get_forecast",
        }

    def test_register_performs_handshake(self):
        catalog = Catalog()
        server, _ = _register(catalog, "weather", WEATHER_TOOLS)
        assert server.state.phase == rpc.STATE_ACTIVE
        assert server.state.client_info.get("name") == "toolgate"

    def test_allowlist_enforced(self):
        catalog = Catalog()
        with pytest.raises(NotAllowlisted):
            _register(catalog, "rogue", WEATHER_TOOLS, allowlisted=False)
        assert catalog.snapshot() == {}

    def test_allowlist_bypass(self):
        catalog = Catalog()
        _, count = _register(
            catalog, "rogue", WEATHER_TOOLS, allowlisted=False, enforce=False
        )
        assert count == 2

    def test_duplicate_server_rejected(self):
        catalog = Catalog()
        _register(catalog, "weather", WEATHER_TOOLS)
        with pytest.raises(DuplicateServer):
            _register(catalog, "weather", GITHUB_TOOLS)
        # original tools untouched
        assert "weather.get_current_weather" in catalog.tools()

    def test_failed_registration_leaves_catalog_untouched(self):
        catalog = Catalog()
        _register(catalog, "weather", WEATHER_TOOLS)

        class DeadTransport:
            def send(self, msg):
                raise ConnectionError("gone")

        with pytest.raises(Exception):
            register_upstream(
                catalog,
                UpstreamConfig(server_id="dead", allowlisted=True),
                DeadTransport(),
            )
        assert set(catalog.snapshot()) == {"weather"}

    def test_resolve_splits_at_first_dot(self):
        catalog = Catalog()
        _register(catalog, "weather", WEATHER_TOOLS)
        server_id, bare, tool = catalog.resolve("weather.get_forecast")
        assert (server_id, bare) == ("weather", "get_forecast")
        assert tool.name == "get_forecast"

    def test_resolve_unknown(self):
        catalog = Catalog()
        with pytest.raises(UnknownToolName):
            catalog.resolve("nowhere.nothing")

    def test_refresh_picks_up_new_tools(self):
        catalog = Catalog()
        server, _ = _register(catalog, "weather", WEATHER_TOOLS)
        server.fixture.tools.append(
            parse_tool_schema(
                _tool("get_alerts", "Retrieves active weather alerts for a region.")
            )
        )
        count = refresh_upstream(catalog, "weather")
        assert count == 3
        assert "weather.get_alerts" in catalog.tools()

    def test_refresh_unknown_server(self):
        catalog = Catalog()
        with pytest.raises(UnknownToolName):
            refresh_upstream(catalog, "ghost")

    def test_snapshot_is_stable_under_refresh(self):
        catalog = Catalog()
        server, _ = _register(catalog, "weather", WEATHER_TOOLS)
        before = catalog.snapshot()
        server.fixture.tools.pop()
        refresh_upstream(catalog, "weather")
        # the old snapshot still lists both tools; the new one has one
        assert len(before["weather"].tools) == 2
        assert len(catalog.snapshot()["weather"].tools) == 1

    def test_concurrent_registration(self):
        catalog = Catalog()
        errors = []

        def worker(i):
            try:
                _register(
                    catalog,
                    f"srv{i}",
                    [
                        _tool(
                            f"tool_{i}",
                            f"Does the number {i} thing with some padding text here.",
                        )
                    ],
                )
            except Exception as exc:  # pragma: no cover - failure path
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(catalog.snapshot()) == 8


class TestTiers:
    def _catalog(self):
        catalog = Catalog()
        _register(catalog, "weather", WEATHER_TOOLS, category="forecasting")
        _register(catalog, "github", GITHUB_TOOLS)
        return catalog

    def test_summary_listing_shape_and_order(self):
        catalog = self._catalog()
        usage = SessionUsage()
        entries = list_tools(catalog, usage)
        assert [e["name"] for e in entries] == [
            "github.create_issue",
            "github.list_repos",
            "weather.get_current_weather",
            "weather.get_forecast",
        ]
        for entry in entries:
            assert set(entry) == {"name", "category", "summary", "actionType"}

    def test_summary_listing_excludes_parameters(self):
        catalog = self._catalog()
        rendered = json.dumps(list_tools(catalog, SessionUsage()))
        assert "inputSchema" not in rendered
        assert "repo_slug" not in rendered

    def test_category_defaults_to_server_id(self):
        catalog = self._catalog()
        by_name = {e["name"]: e for e in list_tools(catalog, SessionUsage())}
        assert by_name["weather.get_forecast"]["category"] == "forecasting"
        assert by_name["github.list_repos"]["category"] == "github"

    def test_full_listing_marks_static(self):
        catalog = self._catalog()
        usage = SessionUsage()
        docs = list_tools(catalog, usage, tier="full")
        assert usage.served_tier == MODE_STATIC
        assert len(docs) == 4
        assert all("." in d["name"] for d in docs)
        assert any("inputSchema" in d for d in docs)

    def test_expand_records_usage(self):
        catalog = self._catalog()
        usage = SessionUsage()
        doc = expand_tool(catalog, usage, "github.create_issue")
        assert doc["name"] == "github.create_issue"
        assert "inputSchema" in doc
        assert usage.expansions == ["github.create_issue"]

    def test_expand_unknown_tool(self):
        catalog = self._catalog()
        with pytest.raises(UnknownToolName):
            expand_tool(catalog, SessionUsage(), "github.ghost")


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Create an ISSUE in repo-42!") == [
            "create",
            "an",
            "issue",
            "in",
            "repo",
            "42",
        ]

    def test_empty(self):
        assert tokenize("...") == []


class TestRoute:
    def _catalog(self):
        catalog = Catalog()
        _register(
            catalog,
            "garden",
            [
                _tool(
                    "plan_orchard_irrigation",
                    "Plans drip irrigation schedules for orchard plots based on soil moisture.",
                    summary="Plans orchard irrigation schedules",
                ),
                _tool(
                    "list_seed_inventory",
                    "Lists seed packets currently held in the greenhouse inventory.",
                    summary="Lists greenhouse seed inventory",
                ),
            ],
            category="horticulture",
        )
        _register(catalog, "github", GITHUB_TOOLS, category="code hosting")
        return catalog

    def test_top_hit_matches_goal_terms(self):
        catalog = self._catalog()
        result = route("set up irrigation for the orchard", catalog, k=3)
        assert result.ranked[0][0] == "garden.plan_orchard_irrigation"

    def test_stage1_prunes_unrelated_servers(self):
        catalog = self._catalog()
        result = route("orchard irrigation moisture", catalog, k=3)
        assert result.stage1_servers == ["garden"]

    def test_stage1_keeps_all_when_no_overlap(self):
        catalog = self._catalog()
        result = route("zzz qqq xyzzy", catalog, k=3)
        assert set(result.stage1_servers) == {"garden", "github"}

    def test_k_caps_results(self):
        catalog = self._catalog()
        assert len(route("list things", catalog, k=1).ranked) == 1

    def test_scores_non_increasing(self):
        catalog = self._catalog()
        ranked = route("create an issue about seeds", catalog, k=4).ranked
        scores = [s for _, s in ranked]
        assert scores == sorted(scores, reverse=True)

    def test_ties_break_lexicographically(self):
        catalog = Catalog()
        _register(
            catalog,
            "twin",
            [
                _tool("beta_probe", "Runs the shared probe routine for diagnostics."),
                _tool("alpha_probe", "Runs the shared probe routine for diagnostics."),
            ],
        )
        ranked = route("shared probe routine diagnostics", catalog, k=2).ranked
        assert ranked[0][1] == pytest.approx(ranked[1][1])
        assert [n for n, _ in ranked] == ["twin.alpha_probe", "twin.beta_probe"]

    def test_matches_independent_scoring(self):
        catalog = self._catalog()
        goal = "create a github issue about irrigation seeds"
        got = dict(route(goal, catalog, k=10).ranked)
        expected = brute_route_scores(goal, catalog)
        assert set(got) <= set(expected)
        for name, score in got.items():
            assert math.isclose(score, expected[name], abs_tol=1e-12), name

    def test_empty_catalog(self):
        assert route("anything", Catalog(), k=5).ranked == []
