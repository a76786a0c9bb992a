"""Shared builders for the test-suite."""
from __future__ import annotations

import random
from fractions import Fraction

from cartomdp.model import W1, W2
from cartomdp.strategy import MemorylessStrategy


def random_memoryless(mdp, rng: random.Random) -> MemorylessStrategy:
    """Each state mixes its enabled labels with small random integer weights."""
    table = {}
    for s in range(mdp.n_states):
        if s == mdp.goal:
            continue
        labels = mdp.labels(s)
        raw = [rng.randint(0, 3) for _ in labels]
        if not any(raw):
            raw[0] = 1
        total = sum(raw)
        table[s] = {lab: Fraction(r, total) for lab, r in zip(labels, raw) if r}
    return MemorylessStrategy(table, mdp.goal, mdp.goal_loop_label())


def path_oracle(mdp, strategy: MemorylessStrategy, nu1):
    """(P(reach Goal), P(TS_w1 >= nu1), E(TS_w2)) by enumerating the paths of
    an acyclic model under a memoryless strategy."""
    reach = good = Fraction(0)
    exp = Fraction(0)
    stack = [(mdp.initial, Fraction(1), Fraction(0), Fraction(0))]
    while stack:
        s, p, a1, a2 = stack.pop()
        if s == mdp.goal:
            reach += p
            exp += p * a2
            if a1 >= nu1:
                good += p
            continue
        for lab, q in strategy.choose(None, s).items():
            for t, r in mdp.edge(s, lab).dist:
                if r:
                    stack.append((t, p * q * r, a1 + mdp.weight(W1, s, t), a2 + mdp.weight(W2, s, t)))
    return reach, good, exp
