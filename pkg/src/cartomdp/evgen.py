"""Scenario generator: scheduling a flexible charging load over a horizon.

At each step the controller picks a flexible load level; a random
non-flexible load is drawn per step. w1 is the flexible energy delivered
(the zero-threshold query asks for at least the charge target on every
outcome), w2 an ageing proxy quadratic in the total load. Levels that would
push the total over the capacity are simply not offered, so the capacity
bound holds on every outcome.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .model import WeightedMdp


@dataclass(frozen=True)
class EvScenario:
    horizon: int
    levels: int
    capacity: int
    target: int
    ageing: Fraction
    nonflex: tuple[tuple[tuple[int, Fraction], ...], ...]

    @classmethod
    def random(
        cls,
        horizon: int = 4,
        levels: int = 3,
        capacity: int | None = None,
        target: int | None = None,
        ageing=Fraction(1, 10),
        seed: int = 0,
    ) -> "EvScenario":
        """Non-flexible loads: two equally likely values per step, drawn from ``seed``."""
        rng = random.Random(seed)
        cap = capacity if capacity is not None else levels + 1
        dists = []
        for _ in range(horizon):
            lo = rng.randint(0, max(cap // 2, 0))
            hi = rng.randint(lo, max(cap - 1, lo))
            if lo == hi:
                dists.append(((lo, Fraction(1)),))
            else:
                dists.append(((lo, Fraction(1, 2)), (hi, Fraction(1, 2))))
        goal = target if target is not None else (levels - 1) * horizon // 2
        return cls(horizon, levels, cap, goal, Fraction(ageing), tuple(dists))

    def ageing_cost(self, load: int) -> Fraction:
        return self.ageing * load * load


def _name(t: int, n: int | None, prev: int) -> str:
    return f"t{t}" if n is None else f"t{t}_n{n}_l{prev}"


def generate(sc: EvScenario) -> WeightedMdp:
    """The scenario as a two-weight model; state (t, non-flexible load, last level)."""
    states = ["start"]
    edges = []
    frontier = {}
    dist0 = {}
    for n, p in sc.nonflex[0]:
        name = _name(0, n, 0)
        dist0[name] = p
        frontier[name] = (0, n)
    edges.append(("start", "begin", dist0, (0, 0)))
    done = set()
    while frontier:
        nxt = {}
        for name, (t, n) in sorted(frontier.items()):
            if name in done:
                continue
            done.add(name)
            states.append(name)
            for level in range(sc.levels):
                load = level + n
                if load > sc.capacity:
                    continue
                w = (level, sc.ageing_cost(load))
                if t + 1 == sc.horizon:
                    tgt = f"end_l{level}"
                    if tgt not in done:
                        done.add(tgt)
                        states.append(tgt)
                        edges.append((tgt, "stop", {"Goal": 1}, (0, 0)))
                    edges.append((name, f"l{level}", {tgt: 1}, w))
                    continue
                dist = {}
                for n2, p in sc.nonflex[t + 1]:
                    tgt = _name(t + 1, n2, level)
                    dist[tgt] = p
                    nxt[tgt] = (t + 1, n2)
                edges.append((name, f"l{level}", dist, w))
        frontier = {k: v for k, v in nxt.items() if k not in done}
    states.append("Goal")
    return WeightedMdp.build(states, "start", "Goal", edges, query={"nu1": sc.target})
