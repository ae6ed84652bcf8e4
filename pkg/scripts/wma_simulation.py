"""Online expert-advice simulation with reliable and unreliable routers.

A pool of simulated experts proposes a tool for each round's goal; good
experts are right most of the time, bad ones mostly guess. The run plays
the rounds through the weighted vote, halving (by epsilon) every wrong
proposer, and compares the aggregate mistake count with the classic
bound relative to the best expert in hindsight.
"""

import argparse
import math
import random

from toolgate.ensemble import ExpertPool, ProposalSet, run_scenario

CANDIDATES = ["search_items", "create_order", "update_profile", "delete_record"]


def build_rounds(n_rounds, good, bad, good_accuracy, bad_accuracy, rng):
    rounds = []
    per_expert_mistakes = {name: 0 for name in good + bad}
    for _ in range(n_rounds):
        truth = rng.choice(CANDIDATES)
        proposals = {}
        for name in good + bad:
            accuracy = good_accuracy if name in good else bad_accuracy
            if rng.random() < accuracy:
                proposals[name] = truth
            else:
                proposals[name] = rng.choice([c for c in CANDIDATES if c != truth])
                per_expert_mistakes[name] += 1
        rounds.append((ProposalSet(proposals=proposals), truth))
    return rounds, per_expert_mistakes


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--good", type=int, default=5, help="number of reliable experts")
    parser.add_argument("--bad", type=int, default=3, help="number of unreliable experts")
    parser.add_argument("--good-accuracy", type=float, default=0.9)
    parser.add_argument("--bad-accuracy", type=float, default=0.3)
    parser.add_argument("--rounds", type=int, default=60)
    parser.add_argument("--epsilon", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--randomized", action="store_true", help="sample the winner instead of arg-max"
    )
    parser.add_argument("--trace", action="store_true", help="print every round")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    good = [f"good{i}" for i in range(args.good)]
    bad = [f"bad{i}" for i in range(args.bad)]
    pool = ExpertPool(weights={name: 1.0 for name in good + bad}, epsilon=args.epsilon)

    rounds, per_expert = build_rounds(
        args.rounds, good, bad, args.good_accuracy, args.bad_accuracy, rng
    )
    final_pool, outcomes = run_scenario(
        pool, rounds, randomized=args.randomized, seed=args.seed
    )

    mistakes = 0
    for outcome in outcomes:
        mistakes += not outcome.correct
        if args.trace:
            marker = " " if outcome.correct else "x"
            print(
                f"round {outcome.round_index:>3} {marker} "
                f"picked {outcome.winner:<14} truth {outcome.truth}"
            )

    n_experts = len(good) + len(bad)
    best_name = min(per_expert, key=lambda name: (per_expert[name], name))
    best_mistakes = per_expert[best_name]
    # Aggregate mistake bound for epsilon = 1/2: 2.41 (m + lg n).
    bound = 2.41 * (best_mistakes + math.log2(n_experts))

    print(f"\nrounds: {args.rounds}  experts: {n_experts} ({len(bad)} unreliable)")
    print(f"aggregate mistakes: {mistakes}")
    print(f"best expert: {best_name} with {best_mistakes} mistakes")
    print(f"bound 2.41*(m + lg n) = {bound:.1f}  -> {'within' if mistakes <= bound else 'ABOVE'}")
    print("\nfinal weights:")
    for name, weight in sorted(final_pool.weights.items(), key=lambda kv: -kv[1]):
        print(f"  {name:<8} {weight:.6g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
