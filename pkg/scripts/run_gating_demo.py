"""Replay scripted gateway scenarios and print their transcripts.

Each scenario spins up a fresh gateway over mock upstreams, runs its
script (calls, approvals, denials, assertions), and reports every step
plus the final check table. Useful for watching the approval flow and
dependency errors without a browser or curl.
"""

import argparse
import json
from pathlib import Path

from toolgate.harness import Scenario, run_scenario

DEFAULT_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "scenarios"


def replay(path: Path, subprocess_servers: bool) -> bool:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if subprocess_servers:
        doc["subprocess_servers"] = True
    result = run_scenario(Scenario.from_doc(doc))

    mode = "subprocess" if subprocess_servers else "in-process"
    print(f"=== {path.name} ({mode} upstreams)")
    for record in result.transcript:
        print(f"  [{record.index:>2}] {record.op:<8} {json.dumps(record.outcome, sort_keys=True)}")
    for check in result.checks:
        marker = "ok " if check.ok else "FAIL"
        print(f"  {marker} step {check.step_index} {check.check}: {check.detail}")
    print(f"  => {'PASS' if result.passed else 'FAIL'}\n")
    return result.passed


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "scenarios", nargs="*", help="scenario files (default: every shipped fixture)"
    )
    parser.add_argument(
        "--subprocess", action="store_true", help="run mock upstreams as child processes"
    )
    args = parser.parse_args()

    paths = [Path(p) for p in args.scenarios] or sorted(DEFAULT_DIR.glob("*.json"))
    if not paths:
        print("no scenario files found")
        return 2

    all_passed = True
    for path in paths:
        all_passed &= replay(path, args.subprocess)
    return 0 if all_passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
