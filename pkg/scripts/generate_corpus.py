"""Write the synthetic benchmark catalog to disk as lintable JSON files.

One file per generated server, shaped {"server_id", "category", "tools":
[...]} with namespaced tool names, a form both `toolgate lint` and
`toolgate measure` accept. Also emits a session script that expands the
priciest tools, so a measure run against the corpus is one command away.
"""

import argparse
import json
from pathlib import Path

from toolgate.corpus import make_benchmark_corpus
from toolgate.schema_model import parse_tool_schema, serialize_tool_schema
from toolgate.tokens import entry_cost, tool_cost


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--servers", type=int, default=10)
    parser.add_argument("--tools", type=int, default=20, help="tools per server")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="corpus", help="output directory")
    parser.add_argument(
        "--expansions", type=int, default=3, help="tools in the emitted session script"
    )
    parser.add_argument(
        "--session",
        default=None,
        help="session script path (default: <out>_session.json, kept outside"
        " the corpus directory so measure does not read it as a tool file)",
    )
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_tools = []
    print(f"{'server':<12}{'tools':>6}{'entry':>8}{'full':>8}{'ratio':>7}")
    for server in make_benchmark_corpus(args.servers, args.tools, seed=args.seed):
        docs = []
        entry_total = full_total = 0
        for tool in server.tools:
            doc = serialize_tool_schema(tool)
            doc["name"] = f"{server.server_id}.{tool.name}"
            namespaced = parse_tool_schema(doc)
            docs.append(doc)
            all_tools.append(namespaced)
            entry_total += entry_cost(namespaced)
            full_total += tool_cost(namespaced)
        path = out_dir / f"{server.server_id}.json"
        path.write_text(
            json.dumps(
                {"server_id": server.server_id, "category": server.category, "tools": docs},
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        ratio = full_total / entry_total if entry_total else 0.0
        print(f"{server.server_id:<12}{len(docs):>6}{entry_total:>8}{full_total:>8}{ratio:>7.1f}")

    priciest = sorted(all_tools, key=tool_cost, reverse=True)[: args.expansions]
    session = {"served_tier": "progressive", "expansions": [t.name for t in priciest]}
    session_path = Path(args.session) if args.session else out_dir.parent / f"{out_dir.name}_session.json"
    session_path.write_text(json.dumps(session, indent=2) + "\n", encoding="utf-8")

    print(f"\nwrote {args.servers} server files and {session_path}")
    print(f"next: toolgate measure --corpus {out_dir} --script {session_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
