"""Static quality checks for governed tool documents.

Per-tool rules look at one document in isolation; catalog rules check
cross-tool relationship integrity (dangling requires, dangling bindings,
dependency cycles). Each rule has a stable id and a severity; the report
score folds findings into a single number in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .schema_model import ToolSchema

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"

# Weighted cost of one finding when scoring a report.
_SEVERITY_WEIGHT = {SEVERITY_ERROR: 1.0, SEVERITY_WARNING: 0.25}

MIN_DESCRIPTION_CHARS = 40  # shorter descriptions are useless for selection


@dataclass(frozen=True)
class LintFinding:
    rule_id: str
    severity: str
    target: str  # tool name, plus parameter name when applicable
    message: str


@dataclass
class LintReport:
    findings: list[LintFinding] = field(default_factory=list)
    checks: int = 0

    @property
    def errors(self) -> list[LintFinding]:
        return [f for f in self.findings if f.severity == SEVERITY_ERROR]

    @property
    def warnings(self) -> list[LintFinding]:
        return [f for f in self.findings if f.severity == SEVERITY_WARNING]

    @property
    def score(self) -> float:
        return score(self.findings, self.checks)


def score(findings: list[LintFinding], checks: int) -> float:
    """1 minus the weighted finding count over the number of checks, clamped.

    An empty report (zero checks) scores a perfect 1.0.
    """
    if checks == 0:
        return 1.0
    weighted = sum(_SEVERITY_WEIGHT[f.severity] for f in findings)
    return max(0.0, min(1.0, 1.0 - weighted / checks))


def _tool_checks(tool: ToolSchema) -> int:
    # SC1 runs once for the description and once per parameter; AB1, FM1,
    # and PD1 run once each.
    return (1 + len(tool.input_schema.parameters)) + 3


def lint_tool(tool: ToolSchema) -> LintReport:
    """Run the per-tool rules against a single document."""
    findings: list[LintFinding] = []
    name = tool.name

    # SC1: descriptions must carry enough signal for model-driven selection.
    if len(tool.description) < MIN_DESCRIPTION_CHARS:
        findings.append(
            LintFinding(
                rule_id="SC1",
                severity=SEVERITY_ERROR,
                target=name,
                message=(
                    f"description is {len(tool.description)} chars,"
                    f" minimum is {MIN_DESCRIPTION_CHARS}"
                ),
            )
        )
    for pname, param in tool.input_schema.parameters.items():
        if not param.description:
            findings.append(
                LintFinding(
                    rule_id="SC1",
                    severity=SEVERITY_ERROR,
                    target=f"{name}.{pname}",
                    message=f"parameter {pname!r} has no description",
                )
            )

    gov = tool.governance
    # AB1: the action boundary must be declared, not inferred.
    if gov is None or gov.action_type is None:
        findings.append(
            LintFinding(
                rule_id="AB1",
                severity=SEVERITY_ERROR,
                target=name,
                message="no declared action type",
            )
        )
    # FM1: tools should declare what failure looks like.
    if gov is None or not gov.failure_modes:
        findings.append(
            LintFinding(
                rule_id="FM1",
                severity=SEVERITY_WARNING,
                target=name,
                message="no declared failure modes",
            )
        )
    # PD1: tools should carry a discovery-tier summary.
    if gov is None or gov.summary is None:
        findings.append(
            LintFinding(
                rule_id="PD1",
                severity=SEVERITY_WARNING,
                target=name,
                message="no discovery summary",
            )
        )

    return LintReport(findings=findings, checks=_tool_checks(tool))


def _name_matches(candidate: str, reference: str) -> bool:
    """A requires/binding reference matches a tool by exact or namespaced name.

    Tools in a federated catalog are prefixed with their server id; a bare
    reference written against the un-namespaced document must still resolve.
    """
    return candidate == reference or candidate.endswith("." + reference)


def _resolve(reference: str, names: list[str]) -> str | None:
    for name in names:
        if _name_matches(name, reference):
            return name
    return None


def _dependency_sccs(graph: dict[str, list[str]]) -> list[list[str]]:
    """Strongly connected components, iterative Tarjan, deterministic order."""
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    sccs: list[list[str]] = []

    for root in sorted(graph):
        if root in index:
            continue
        # Explicit stack of (node, iterator position) to avoid recursion limits.
        work = [(root, 0)]
        while work:
            node, pos = work.pop()
            if pos == 0:
                index[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            recurse = False
            neighbors = graph[node]
            for i in range(pos, len(neighbors)):
                succ = neighbors[i]
                if succ not in index:
                    work.append((node, i + 1))
                    work.append((succ, 0))
                    recurse = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if recurse:
                continue
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                sccs.append(sorted(component))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return sccs


def lint_catalog(tools: list[ToolSchema]) -> LintReport:
    """Run per-tool rules plus cross-tool relationship rules over a catalog."""
    findings: list[LintFinding] = []
    checks = 0
    for tool in tools:
        report = lint_tool(tool)
        findings.extend(report.findings)
        checks += report.checks

    names = [tool.name for tool in tools]

    # IR1: every requires entry must resolve to a tool in the catalog.
    # IR2: every binding target tool and parameter must exist.
    # Edges for cycle detection use resolved catalog names.
    graph: dict[str, list[str]] = {name: [] for name in names}
    by_name = {tool.name: tool for tool in tools}
    for tool in tools:
        gov = tool.governance
        if gov is None:
            continue
        for reference in gov.requires:
            checks += 1
            resolved = _resolve(reference, names)
            if resolved is None:
                findings.append(
                    LintFinding(
                        rule_id="IR1",
                        severity=SEVERITY_ERROR,
                        target=tool.name,
                        message=f"requires unknown tool {reference!r}",
                    )
                )
            else:
                graph[tool.name].append(resolved)
        for binding in gov.bindings:
            checks += 1
            resolved = _resolve(binding.target_tool, names)
            if resolved is None:
                findings.append(
                    LintFinding(
                        rule_id="IR2",
                        severity=SEVERITY_ERROR,
                        target=tool.name,
                        message=f"binding targets unknown tool {binding.target_tool!r}",
                    )
                )
                continue
            target = by_name[resolved]
            if binding.target_param not in target.input_schema.parameters:
                findings.append(
                    LintFinding(
                        rule_id="IR2",
                        severity=SEVERITY_ERROR,
                        target=tool.name,
                        message=(
                            f"binding targets unknown parameter"
                            f" {binding.target_param!r} of {resolved!r}"
                        ),
                    )
                )

    # IR3: the requires graph must stay acyclic; one finding per cycle,
    # anchored at the lexicographically smallest member. One check per tool.
    checks += len(tools)
    for component in _dependency_sccs(graph):
        # A single node is a cycle only via a self-edge, which can appear
        # when a namespaced tool requires its own bare name.
        if len(component) == 1 and component[0] not in graph[component[0]]:
            continue
        findings.append(
            LintFinding(
                rule_id="IR3",
                severity=SEVERITY_ERROR,
                target=component[0],
                message=f"dependency cycle: {' -> '.join(component)}",
            )
        )

    return LintReport(findings=findings, checks=checks)
