"""Exact probabilities and expectations under finite-memory strategies.

Everything works on the Markov chain induced over (state, memory) pairs.
Horizon-bounded events are computed by forward propagation of exact
rational masses; truncated-sum expectations by an exact absorption solve.
"""
from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable

from .linalg import reaches, solve_chain
from .model import PHI_MINUS, PHI_PLUS, PSI, W1, WeightedMdp
from .strategy import Strategy, StrategyError

DEFAULT_BUDGET = 200_000

REACH = "reach"
PHI_MINUS_OR_PSI = "phi_minus_or_psi"
EVENT_KINDS = (PHI_PLUS, PHI_MINUS, PSI, PHI_MINUS_OR_PSI, REACH)


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EventSpec:
    horizon: int
    kind: str
    nu1: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")

    def holds(self, outcome: str) -> bool:
        if self.kind == PHI_MINUS_OR_PSI:
            return outcome in (PHI_MINUS, PSI)
        if self.kind == REACH:
            return outcome in (PHI_PLUS, PHI_MINUS)
        return outcome == self.kind


def step(mdp: WeightedMdp, strategy: Strategy, state: int, memory: Hashable):
    """Successor (state, memory) pairs with their exact probabilities."""
    out: dict[tuple[int, Hashable], Fraction] = defaultdict(Fraction)
    for label, q in strategy.choose(memory, state).items():
        if not q:
            continue
        edge = mdp.edge(state, label)
        for t, p in edge.dist:
            if p:
                out[(t, strategy.update(memory, state, t))] += q * p
    return out


def outcome_masses(mdp: WeightedMdp, strategy: Strategy, horizon: int, nu1: Fraction) -> dict[str, Fraction]:
    """Masses of phi_N^+, phi_N^- and psi_N (they sum to one)."""
    masses = {PHI_PLUS: Fraction(0), PHI_MINUS: Fraction(0), PSI: Fraction(0)}
    s0 = mdp.initial
    front: dict[tuple, Fraction] = {(s0, strategy.initial_memory(s0), Fraction(0)): Fraction(1)}
    for _ in range(horizon + 1):
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (s, mem, acc), mass in front.items():
            if s == mdp.goal:
                masses[PHI_PLUS if acc >= nu1 else PHI_MINUS] += mass
                continue
            nxt[(s, mem, acc)] += mass
        front = nxt
        if _ == horizon:
            break
        stepped: dict[tuple, Fraction] = defaultdict(Fraction)
        for (s, mem, acc), mass in front.items():
            for (t, m2), p in step(mdp, strategy, s, mem).items():
                stepped[(t, m2, acc + mdp.weight(W1, s, t))] += mass * p
        front = stepped
    masses[PSI] = sum(front.values(), Fraction(0))
    return masses


def probability(mdp: WeightedMdp, strategy: Strategy, event: EventSpec) -> Fraction:
    masses = outcome_masses(mdp, strategy, event.horizon, event.nu1)
    return sum((m for k, m in masses.items() if event.holds(k)), Fraction(0))


@dataclass
class Chain:
    nodes: list[tuple[int, Hashable]]
    trans: list[list[tuple[int, Fraction]]]
    goal_nodes: set[int]

    def succ(self):
        return [[j for j, p in row if p] for row in self.trans]


def explore(mdp: WeightedMdp, strategy: Strategy, budget: int = DEFAULT_BUDGET, track=None) -> Chain:
    """Reachable part of the chain over (state, memory[, tracked value]).

    ``track`` optionally adds a coordinate updated by ``track(value, s, t)``
    (used to follow an accumulated weight until Goal).
    """
    s0 = mdp.initial
    first = (s0, strategy.initial_memory(s0)) if track is None else (s0, strategy.initial_memory(s0), Fraction(0))
    index = {first: 0}
    nodes = [first]
    trans: list[list[tuple[int, Fraction]]] = []
    goal_nodes: set[int] = set()
    i = 0
    while i < len(nodes):
        node = nodes[i]
        s, mem = node[0], node[1]
        row: list[tuple[int, Fraction]] = []
        if s == mdp.goal:
            goal_nodes.add(i)
        else:
            for (t, m2), p in step(mdp, strategy, s, mem).items():
                key = (t, m2) if track is None else (t, m2, track(node[2], s, t))
                j = index.get(key)
                if j is None:
                    if len(nodes) >= budget:
                        raise BudgetExceeded(f"more than {budget} (state, memory) pairs")
                    j = index[key] = len(nodes)
                    nodes.append(key)
                row.append((j, p))
        trans.append(row)
        i += 1
    return Chain(nodes, trans, goal_nodes)


def reach_probability(mdp: WeightedMdp, strategy: Strategy, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Probability of eventually visiting Goal (unbounded)."""
    chain = explore(mdp, strategy, budget)
    return _absorb_probability(chain, chain.goal_nodes)


def _absorb_probability(chain: Chain, targets: set[int]) -> Fraction:
    good = reaches(chain.succ(), targets)
    fixed = {i: Fraction(1) for i in targets}
    for i in range(len(chain.nodes)):
        if i not in good or (i in chain.goal_nodes and i not in targets):
            fixed[i] = Fraction(0)
    trans = [row if i not in fixed else [] for i, row in enumerate(chain.trans)]
    return solve_chain(trans, [Fraction(0)] * len(trans), fixed)[0]


def ts_probability_at_least(
    mdp: WeightedMdp, strategy: Strategy, i: int, nu: Fraction, budget: int = DEFAULT_BUDGET
) -> Fraction:
    """Prob(TS_{w_i} >= nu), unbounded horizon.

    Exact as long as the chain augmented with the accumulated weight is
    finite (e.g. weights along cycles are zero, or the strategy surely stops).
    """
    chain = explore(mdp, strategy, budget, track=lambda acc, s, t: acc + mdp.weight(i, s, t))
    targets = {j for j in chain.goal_nodes if chain.nodes[j][2] >= nu}
    return _absorb_probability(chain, targets)


def expectation_ts(mdp: WeightedMdp, strategy: Strategy, i: int, budget: int = DEFAULT_BUDGET) -> Fraction | float:
    """E(TS_{w_i}) exactly; ``math.inf`` when Goal is missed with positive probability."""
    chain = explore(mdp, strategy, budget)
    succ = chain.succ()
    good = reaches(succ, chain.goal_nodes)
    # any reachable node that cannot reach Goal carries positive mass
    if len(good) < len(chain.nodes):
        return math.inf
    reward = []
    for j, (s, _) in enumerate(chain.nodes):
        reward.append(sum((p * mdp.weight(i, s, chain.nodes[t][0]) for t, p in chain.trans[j]), Fraction(0)))
    fixed = {j: Fraction(0) for j in chain.goal_nodes}
    return solve_chain(chain.trans, reward, fixed)[0]


def is_sure(mdp: WeightedMdp, strategy: Strategy, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff every outcome reaches Goal (finite outcome tree)."""
    chain = explore(mdp, strategy, budget)
    succ = chain.succ()
    colour = [0] * len(succ)
    for root in range(len(succ)):
        if colour[root]:
            continue
        stack = [(root, iter(succ[root]))]
        colour[root] = 1
        while stack:
            v, it = stack[-1]
            for w in it:
                if w in chain.goal_nodes:
                    continue
                if colour[w] == 1:
                    return False
                if colour[w] == 0:
                    colour[w] = 1
                    stack.append((w, iter(succ[w])))
                    break
            else:
                colour[v] = 2
                stack.pop()
    return True


def horizon_profile(mdp: WeightedMdp, strategy: Strategy, i: int):
    """Yield ``(k, E(Acc^k_{w_i}), Prob(G[<=k] not Goal), mass per non-Goal state)``
    for k = 0, 1, 2, ... (Goal-stopped accumulation)."""
    s0 = mdp.initial
    front: dict[tuple, Fraction] = {(s0, strategy.initial_memory(s0)): Fraction(1)}
    acc = Fraction(0)
    k = 0
    while True:
        alive = {key: m for key, m in front.items() if key[0] != mdp.goal}
        by_state: dict[int, Fraction] = defaultdict(Fraction)
        for (s, _), m in alive.items():
            by_state[s] += m
        yield k, acc, sum(alive.values(), Fraction(0)), dict(by_state)
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (s, mem), mass in alive.items():
            for (t, m2), p in step(mdp, strategy, s, mem).items():
                acc += mass * p * mdp.weight(i, s, t)
                nxt[(t, m2)] += mass * p
        front = nxt
        k += 1


# Monte-Carlo -------------------------------------------------------------------------

Z99 = 2.5758293035489


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    samples: int
    capped: int

    def contains(self, value) -> bool:
        return abs(float(value) - self.mean) <= self.half_width


def _sample_label(rng: random.Random, dist) -> str:
    u = rng.random()
    acc = 0.0
    last = None
    for label, p in dist.items():
        if not p:
            continue
        acc += float(p)
        last = label
        if u < acc:
            return label
    return last


def monte_carlo(
    mdp: WeightedMdp,
    strategy: Strategy,
    target: EventSpec | int,
    samples: int,
    seed: int = 0,
    step_cap: int = 10_000,
) -> Estimate:
    """Sampled estimate of an event probability or of E(TS_{w_i}) (``target`` an int).

    For expectations, runs hitting ``step_cap`` without reaching Goal are
    left out of the mean and counted in ``capped``; for events they count
    as the event not being observed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = random.Random(seed)
    values = []
    capped = 0
    horizon = target.horizon if isinstance(target, EventSpec) else step_cap
    for _ in range(samples):
        s = mdp.initial
        mem = strategy.initial_memory(s)
        acc1 = Fraction(0)
        total = Fraction(0)
        steps = 0
        while s != mdp.goal and steps < horizon:
            label = _sample_label(rng, strategy.choose(mem, s))
            edge = mdp.edge(s, label)
            t = edge.dist[-1][0]
            u = rng.random()
            run = 0.0
            for tt, p in edge.dist:
                run += float(p)
                if u < run:
                    t = tt
                    break
            acc1 += mdp.weight(W1, s, t)
            if not isinstance(target, EventSpec):
                total += mdp.weight(target, s, t)
            mem = strategy.update(mem, s, t)
            s = t
            steps += 1
        if isinstance(target, EventSpec):
            if s == mdp.goal:
                outcome = PHI_PLUS if acc1 >= target.nu1 else PHI_MINUS
            else:
                outcome = PSI
            values.append(1.0 if target.holds(outcome) else 0.0)
        elif s == mdp.goal:
            values.append(float(total))
        else:
            capped += 1
    if not values:
        return Estimate(math.nan, math.inf, 0, capped)
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    return Estimate(mean, Z99 * math.sqrt(var / n), n, capped)


__all__ = [
    "BudgetExceeded",
    "EventSpec",
    "Estimate",
    "StrategyError",
    "expectation_ts",
    "horizon_profile",
    "is_sure",
    "monte_carlo",
    "outcome_masses",
    "probability",
    "reach_probability",
    "ts_probability_at_least",
]
