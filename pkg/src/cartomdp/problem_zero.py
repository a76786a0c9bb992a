"""The zero-threshold problem: every outcome must reach Goal with
TS_w1 >= nu1, and E(TS_w2) < nu2.

The w1 sum is tracked in a bounded counter (saturating once it can no
longer matter), which turns the worst-case constraint into plain
reachability of good Goal copies in a one-constraint product; the answer is
then a shortest-path question on the w2 weight.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, lcm

from .analysis import AssumptionNotMet, NoAttractor, SspValue, attractor_strategy, cycle_report, restrict, ssp_solve, sure_attractor
from .model import W1, W2, WeightedMdp
from .optimize import Assembly, find_switch_step
from .semantics import DEFAULT_BUDGET, BudgetExceeded, expectation_ts, is_sure, ts_probability_at_least
from .strategy import MemorylessStrategy, Strategy, SwitchingStrategy

NON_NEGATIVE = "non-negative"
NON_POSITIVE = "non-positive"

POS_INF = "inf"
NEG_INF = "-inf"


@dataclass
class ProductMdp:
    """Product of a model with a saturating w1 counter.

    ``model`` keeps both weights of the original pairs; its Goal is the
    merged set of good Goal copies. ``counters[q]`` is ``(state, counter)``
    for every non-Goal product state (bad Goal copies are absorbing traps).
    """

    original: WeightedMdp
    model: WeightedMdp
    mode: str
    nu1: Fraction
    scale: int
    W: int
    M: int
    domain: tuple[int, int]
    counters: dict[int, tuple[int, int | str]]
    lookup: dict[tuple[int, int | str], int]
    traps: set[int] = field(default_factory=set)

    @property
    def size(self) -> int:
        return self.model.n_states

    def step_counter(self, c, w: int):
        lo, hi = self.domain
        if self.mode == NON_NEGATIVE:
            if c == POS_INF:
                return POS_INF
            c2 = c + w
            if c2 > hi:
                return POS_INF
            if c2 < lo:
                raise AssumptionNotMet("counter fell below its domain; w1 cycles are not all non-negative")
            return c2
        if c == NEG_INF:
            return NEG_INF
        c2 = c + w
        if c2 < lo:
            return NEG_INF
        if c2 > hi:
            raise AssumptionNotMet("counter rose above its domain; w1 cycles are not all non-positive")
        return c2

    def good(self, c) -> bool:
        if c == POS_INF:
            return True
        if c == NEG_INF:
            return False
        return c >= self.nu1 * self.scale

    def image(self, q: int, s: int, t: int) -> int:
        """Product successor of product state ``q`` (at model state ``s``) moving to ``t``."""
        _, c = self.counters[q]
        c2 = self.step_counter(c, self.scaled(s, t))
        return self.lookup[(t, c2)]

    def scaled(self, s: int, t: int) -> int:
        return int(self.original.weight(W1, s, t) * self.scale)


def choose_mode(mdp: WeightedMdp) -> str:
    rep = cycle_report(mdp, W1)
    if rep.all_nonnegative:
        return NON_NEGATIVE
    if rep.all_nonpositive:
        return NON_POSITIVE
    raise AssumptionNotMet("w1 has cycles of both signs; the zero-threshold problem is not covered")


def _label(name: str, c) -> str:
    return f"{name}@{c}"


def build_product(mdp: WeightedMdp, nu1, mode: str | None = None, budget: int = DEFAULT_BUDGET) -> ProductMdp:
    """Reachable part of the counter product, built breadth-first."""
    nu1 = Fraction(nu1)
    if mode is None:
        mode = choose_mode(mdp)
    else:
        rep = cycle_report(mdp, W1)
        if mode == NON_NEGATIVE and not rep.all_nonnegative:
            raise AssumptionNotMet("some w1 cycle is negative")
        if mode == NON_POSITIVE and not rep.all_nonpositive:
            raise AssumptionNotMet("some w1 cycle is positive")
    pairs = list(mdp.pairs())
    scale = lcm(nu1.denominator, *(mdp.weight(W1, s, t).denominator for s, t in pairs))
    W = max((abs(int(mdp.weight(W1, s, t) * scale)) for s, t in pairs), default=0)
    M = W * (mdp.n_states + 1)
    fl = floor(nu1 * scale)
    domain = (-M, M + fl + 1) if mode == NON_NEGATIVE else (fl - 1 - M, M + 1)
    bound = mdp.n_states * (domain[1] - domain[0] + 2)
    goal = mdp.goal

    proto = ProductMdp(mdp, None, mode, nu1, scale, W, M, domain, {}, {})  # type: ignore[arg-type]
    start = (mdp.initial, 0)
    order = [start]
    seen = {start}
    queue = deque([start])
    while queue:
        s, c = queue.popleft()
        if s == goal:
            continue
        for t in mdp.successors(s):
            key = (t, proto.step_counter(c, proto.scaled(s, t)))
            if key not in seen:
                if len(seen) >= budget:
                    raise BudgetExceeded(f"product exceeds {budget} states (worst case {bound})")
                seen.add(key)
                order.append(key)
                queue.append(key)

    def is_target(key) -> bool:
        return key[0] == goal and proto.good(key[1])

    names = []
    lookup: dict[tuple, int] = {}
    counters: dict[int, tuple] = {}
    for key in order:
        if is_target(key):
            continue
        lookup[key] = len(names)
        counters[len(names)] = key
        names.append(_label(mdp.states[key[0]], key[1]))
    goal_index = len(names)
    names.append("Goal")
    for key in order:
        if is_target(key):
            lookup[key] = goal_index
    traps = {lookup[k] for k in order if k[0] == goal and not is_target(k)}
    edges = []
    for key in order:
        if is_target(key):
            continue
        s, c = key
        src = names[lookup[key]]
        if s == goal:
            edges.append((src, "trap", {src: 1}, (0, 0)))
            continue
        for e in mdp.edges[s]:
            dist: dict[str, Fraction] = {}
            ws: dict[str, tuple] = {}
            for t, p in e.dist:
                if not p:
                    continue
                tgt = names[lookup[(t, proto.step_counter(c, proto.scaled(s, t)))]]
                dist[tgt] = dist.get(tgt, Fraction(0)) + p
                ws[tgt] = (mdp.weight(W1, s, t), mdp.weight(W2, s, t))
            edges.append((src, e.label, dist, ws))
    model = WeightedMdp.build(names, names[lookup[start]], "Goal", edges, mdp.weight_names)
    return ProductMdp(mdp, model, mode, nu1, scale, W, M, domain, counters, lookup, traps)


@dataclass
class ProductStrategy(Strategy):
    """A strategy of the product run on the original model (counter kept in memory)."""

    product: ProductMdp
    inner: Strategy

    def initial_memory(self, state):
        q = self.product.model.initial
        return (q, self.inner.initial_memory(q))

    def update(self, memory, state, nxt):
        q, mem = memory
        if q == self.product.model.goal:
            return memory
        q2 = self.product.image(q, state, nxt)
        return (q2, self.inner.update(mem, q, q2))

    def choose(self, memory, state):
        q, mem = memory
        if q == self.product.model.goal:
            return {self.product.original.goal_loop_label(): Fraction(1)}
        return self.inner.choose(mem, q)


@dataclass
class P0Result:
    answer: bool
    value: SspValue
    product: ProductMdp
    strategy: ProductStrategy | None = None
    assembly: Assembly | None = None

    @property
    def verdict(self) -> str:
        return "Yes" if self.answer else "No"


def decide_p0(mdp: WeightedMdp, nu1, nu2, mode: str | None = None, budget: int = DEFAULT_BUDGET) -> P0Result:
    """Yes iff the least expected w2 for surely reaching a good Goal copy of
    the product is below nu2 (-inf counts as Yes); on Yes, a witness
    strategy for the original model."""
    nu2 = Fraction(nu2)
    prod = build_product(mdp, nu1, mode, budget)
    rank, _ = sure_attractor(prod.model)
    if prod.model.initial not in rank:
        return P0Result(False, SspValue("+inf"), prod)
    sub = restrict(prod.model, rank)
    sol = ssp_solve(sub, W2)
    value = sol[sub.initial]
    if not value.number < nu2:
        return P0Result(False, value, prod)
    att, bound = attractor_strategy(sub, W2)
    asm = find_switch_step(
        sub, sol.policy, value.number, nu2, att, bound, lambda k: SwitchingStrategy(sol.policy, k, att)
    )
    # sub keeps the product's state order on the attractor; map indices back
    back = {i: prod.model.index[name] for i, name in enumerate(sub.states)}
    inner = _Reindexed(asm.strategy, back)
    return P0Result(True, value, prod, ProductStrategy(prod, inner), asm)


@dataclass
class _Reindexed(Strategy):
    """Runs a strategy of a restricted model on the full product's indices."""

    inner: Strategy
    to_full: dict[int, int]

    def __post_init__(self):
        self.to_sub = {v: k for k, v in self.to_full.items()}

    def initial_memory(self, state):
        return self.inner.initial_memory(self.to_sub[state])

    def update(self, memory, state, nxt):
        return self.inner.update(memory, self.to_sub[state], self.to_sub[nxt])

    def choose(self, memory, state):
        return self.inner.choose(memory, self.to_sub[state])


@dataclass
class P0Check:
    sure: bool
    threshold: bool
    expectation: Fraction | float
    reasons: list[str]

    @property
    def ok(self) -> bool:
        return not self.reasons


def verify_p0_witness(mdp: WeightedMdp, strategy: Strategy, nu1, nu2, budget: int = DEFAULT_BUDGET) -> P0Check:
    """Exact check: all outcomes reach Goal with TS_w1 >= nu1, and E(TS_w2) < nu2."""
    nu1, nu2 = Fraction(nu1), Fraction(nu2)
    if not is_sure(mdp, strategy, budget):
        return P0Check(False, False, math.inf, ["reachability"])
    reasons = []
    threshold = ts_probability_at_least(mdp, strategy, W1, nu1, budget) == 1
    if not threshold:
        reasons.append("threshold")
    e = expectation_ts(mdp, strategy, W2, budget)
    if not e < nu2:
        reasons.append("expectation")
    return P0Check(True, threshold, e, reasons)


def p0_oracle(mdp: WeightedMdp, nu1, nu2, grid: int = 8) -> tuple[bool, Fraction | float]:
    """Independent answer for acyclic models by exhaustive search.

    Walks the (finite) tree of histories; at each node tries every pure
    choice and every two-edge mix with weights in multiples of 1/grid,
    keeping only options under which every outcome is good. Returns the
    answer and the least expectation found.
    """
    nu1, nu2 = Fraction(nu1), Fraction(nu2)
    goal = mdp.goal

    def best(s: int, acc1: Fraction, depth: int) -> Fraction | float:
        if s == goal:
            return Fraction(0) if acc1 >= nu1 else math.inf
        if depth > mdp.n_states:
            raise ValueError("oracle needs an acyclic model")
        per_edge = []
        for e in mdp.edges[s]:
            total: Fraction | float = Fraction(0)
            for t, p in e.dist:
                if not p:
                    continue
                sub = best(t, acc1 + mdp.weight(W1, s, t), depth + 1)
                if sub == math.inf:
                    total = math.inf
                    break
                total += p * (mdp.weight(W2, s, t) + sub)
            per_edge.append(total)
        options = list(per_edge)
        for i, j in itertools.combinations(range(len(per_edge)), 2):
            for k in range(1, grid):
                a, b = per_edge[i], per_edge[j]
                if a == math.inf or b == math.inf:
                    continue
                options.append(Fraction(k, grid) * a + Fraction(grid - k, grid) * b)
        return min(options, default=math.inf)

    value = best(mdp.initial, Fraction(0), 0)
    return value < nu2, value


__all__ = [
    "NON_NEGATIVE",
    "NON_POSITIVE",
    "P0Check",
    "P0Result",
    "ProductMdp",
    "ProductStrategy",
    "build_product",
    "choose_mode",
    "decide_p0",
    "p0_oracle",
    "verify_p0_witness",
]
