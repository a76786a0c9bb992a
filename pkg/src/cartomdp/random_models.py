"""Seeded random models for property tests and benchmarks."""
from __future__ import annotations

import random
from fractions import Fraction

from .model import WeightedMdp

PROBS = ((Fraction(1),), (Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 3), Fraction(2, 3)), (Fraction(1, 4), Fraction(3, 4)))


def random_mdp(
    rng: random.Random,
    n_states: int = 4,
    max_actions: int = 2,
    max_support: int = 2,
    weight_range: tuple[int, int] = (-2, 2),
    w1_range: tuple[int, int] | None = None,
    w2_range: tuple[int, int] | None = None,
    acyclic: bool = False,
    goal_edge: bool = True,
) -> WeightedMdp:
    """A valid two-weight model with states s0..s{n-2} and Goal.

    Weights are drawn per state pair so that edges sharing a pair agree.
    ``acyclic`` only allows edges to later states (Goal last). With
    ``goal_edge`` every state gets at least one Dirac edge to Goal, which
    puts every state in the sure attractor.
    """
    names = [f"s{i}" for i in range(n_states - 1)] + ["Goal"]
    r1 = w1_range or weight_range
    r2 = w2_range or weight_range
    pair_w: dict[tuple[str, str], tuple[int, int]] = {}

    def weights(s, t):
        if (s, t) not in pair_w:
            pair_w[(s, t)] = (rng.randint(*r1), rng.randint(*r2))
        return pair_w[(s, t)]

    edges = []
    for i, s in enumerate(names[:-1]):
        targets = names[i + 1:] if acyclic else names
        n_act = rng.randint(1, max_actions)
        made = 0
        if goal_edge:
            edges.append((s, "g", {"Goal": 1}, {"Goal": weights(s, "Goal")}))
            made = 1
        for a in range(made, max(n_act, made + (0 if goal_edge else 1))):
            k = rng.randint(1, min(max_support, len(targets)))
            probs = rng.choice([p for p in PROBS if len(p) == k])
            tgts = rng.sample(targets, k)
            dist = dict(zip(tgts, probs))
            edges.append((s, f"a{a}", dist, {t: weights(s, t) for t in tgts}))
    return WeightedMdp.build(names, names[0], "Goal", edges)
