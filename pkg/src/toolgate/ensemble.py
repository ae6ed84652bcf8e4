"""Weighted-majority aggregation over tool-choice proposals.

A pool of named experts each proposes a tool for a given goal. Candidate
scores are the sums of proposing experts' weights; the deterministic
aggregate picks the highest-scoring candidate (ties break lexicographically
so runs are reproducible). After ground truth is known, every expert that
proposed a different tool is multiplied by (1 - epsilon). The randomized
variant samples a single proposal with probability proportional to the
proposer weight sums.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ToolgateError

DEFAULT_EPSILON = 0.5


class UnknownExpert(ToolgateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"proposal from unknown expert: {name}")


class InvalidPool(ToolgateError):
    pass


@dataclass
class ExpertPool:
    """Expert weights plus the penalty rate. Weights stay strictly positive."""

    weights: dict[str, float]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not self.weights:
            raise InvalidPool("pool has no experts")
        for name, weight in self.weights.items():
            if not weight > 0:
                raise InvalidPool(f"expert {name!r} has non-positive weight {weight}")
        if not 0 < self.epsilon < 1:
            raise InvalidPool(f"epsilon must be in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class ProposalSet:
    """One proposal per expert for a single decision."""

    proposals: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Tally:
    scores: dict[str, float]  # candidate tool -> summed proposer weight
    winner: str

    @property
    def distribution(self) -> dict[str, float]:
        total = sum(self.scores.values())
        return {name: score / total for name, score in self.scores.items()}


def tally(pool: ExpertPool, proposals: ProposalSet) -> Tally:
    """Sum proposer weights per candidate and pick the deterministic winner."""
    if not proposals.proposals:
        raise InvalidPool("no proposals to tally")
    scores: dict[str, float] = {}
    for expert, candidate in proposals.proposals.items():
        if expert not in pool.weights:
            raise UnknownExpert(expert)
        scores[candidate] = scores.get(candidate, 0.0) + pool.weights[expert]
    # max() keeps the first of equal keys, so sort candidates for a stable tie rule
    winner = max(sorted(scores), key=lambda c: scores[c])
    return Tally(scores=scores, winner=winner)


def update_weights(pool: ExpertPool, proposals: ProposalSet, truth: str) -> ExpertPool:
    """Multiply every wrong proposer's weight by (1 - epsilon); returns a new pool.

    Experts that did not propose this round keep their weight untouched.
    """
    new_weights = dict(pool.weights)
    for expert, candidate in proposals.proposals.items():
        if expert not in pool.weights:
            raise UnknownExpert(expert)
        if candidate != truth:
            new_weights[expert] = pool.weights[expert] * (1.0 - pool.epsilon)
    return ExpertPool(weights=new_weights, epsilon=pool.epsilon)


def sample(pool: ExpertPool, proposals: ProposalSet, rng: random.Random) -> str:
    """Randomized pick: candidate probability is its share of summed weight."""
    result = tally(pool, proposals)
    candidates = sorted(result.scores)
    total = sum(result.scores.values())
    threshold = rng.random() * total
    cumulative = 0.0
    for candidate in candidates:
        cumulative += result.scores[candidate]
        if threshold < cumulative:
            return candidate
    return candidates[-1]  # guard against float round-off at the top end


@dataclass(frozen=True)
class RoundOutcome:
    round_index: int
    winner: str
    truth: str
    correct: bool
    weights_after: dict[str, float]


def run_scenario(
    pool: ExpertPool,
    rounds: list[tuple[ProposalSet, str]],
    randomized: bool = False,
    seed: int = 0,
) -> tuple[ExpertPool, list[RoundOutcome]]:
    """Play a sequence of (proposals, truth) rounds, updating after each."""
    rng = random.Random(seed)
    outcomes = []
    for i, (proposals, truth) in enumerate(rounds):
        if randomized:
            winner = sample(pool, proposals, rng)
        else:
            winner = tally(pool, proposals).winner
        pool = update_weights(pool, proposals, truth)
        outcomes.append(
            RoundOutcome(
                round_index=i,
                winner=winner,
                truth=truth,
                correct=winner == truth,
                weights_after=dict(pool.weights),
            )
        )
    return pool, outcomes
