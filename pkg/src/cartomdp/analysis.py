"""Graph and fixpoint analyses: almost-sure and sure reachability, stochastic
shortest paths (with the +inf / -inf / finite classification), cycle signs,
and the two completeness constants (the w2 gap constant and the w1
stabilisation horizon)."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from .kernels import INF, minplus_matmul
from .linalg import solve_chain, solve_linear
from .model import W1, W2, Edge, WeightedMdp
from .strategy import MemorylessStrategy


class AssumptionNotMet(ValueError):
    """A cycle-sign hypothesis required by the requested bound does not hold."""


class NoAttractor(ValueError):
    pass


PLUS_INF = "+inf"
MINUS_INF = "-inf"
FINITE = "finite"


@dataclass(frozen=True)
class SspValue:
    tag: str
    value: Fraction | None = None

    @classmethod
    def finite(cls, v) -> "SspValue":
        return cls(FINITE, Fraction(v))

    @property
    def number(self) -> Fraction | float:
        if self.tag == PLUS_INF:
            return math.inf
        if self.tag == MINUS_INF:
            return -math.inf
        return self.value

    def __str__(self) -> str:
        return self.tag if self.tag != FINITE else str(self.value)


SSP_PLUS = SspValue(PLUS_INF)
SSP_MINUS = SspValue(MINUS_INF)


# reachability ---------------------------------------------------------------------------


def _supported(e: Edge, region: set[int]) -> bool:
    return all(t in region for t in e.support)


def almost_sure_states(mdp: WeightedMdp) -> frozenset[int]:
    """States from which some strategy reaches Goal with probability one."""
    region = set(range(mdp.n_states))
    while True:
        good = {mdp.goal}
        changed = True
        while changed:
            changed = False
            for s in region - good:
                if any(_supported(e, region) and any(t in good for t in e.support) for e in mdp.edges[s]):
                    good.add(s)
                    changed = True
        if good == region:
            return frozenset(region)
        region = good


def sure_attractor(mdp: WeightedMdp, region: Iterable[int] | None = None) -> tuple[dict[int, int], dict[int, str]]:
    """Ranks and rank-decreasing edge choices of the sure attractor of Goal.

    The rank of a state is the number of steps within which its choice
    forces Goal whatever the random outcomes.
    """
    allowed = set(range(mdp.n_states)) if region is None else set(region)
    rank = {mdp.goal: 0}
    choice: dict[int, str] = {}
    level = 0
    while True:
        level += 1
        new = {}
        for s in allowed:
            if s in rank:
                continue
            for e in mdp.edges[s]:
                if all(t in rank for t in e.support):
                    new[s] = e.label
                    break
        if not new:
            return rank, choice
        for s, lab in new.items():
            rank[s] = level
            choice[s] = lab


def attractor_strategy(mdp: WeightedMdp, i: int = W2) -> tuple[MemorylessStrategy, Fraction]:
    """Memoryless strategy surely reaching Goal from every state of the sure
    attractor, and a positive bound on the w_i weight it accumulates."""
    rank, choice = sure_attractor(mdp)
    if mdp.initial not in rank:
        raise NoAttractor(f"Goal cannot be surely reached from {mdp.states[mdp.initial]!r}")
    worst = {mdp.goal: Fraction(0)}
    for s in sorted(choice, key=rank.__getitem__):
        e = mdp.edge(s, choice[s])
        worst[s] = max(mdp.weight(i, s, t) + worst[t] for t in e.support)
    bound = max(max(worst.values()), Fraction(1))
    return MemorylessStrategy.pure(mdp, choice), bound


def restrict(mdp: WeightedMdp, region: Iterable[int]) -> WeightedMdp:
    """Sub-model on ``region`` keeping only edges whose support stays inside."""
    keep = sorted(set(region) | {mdp.goal, mdp.initial})
    inside = set(keep)
    names = [mdp.states[s] for s in keep]
    rows = []
    for s in keep:
        for e in mdp.edges[s]:
            if _supported(e, inside):
                dist = {mdp.states[t]: p for t, p in e.dist if p}
                ws = {mdp.states[t]: w for (t, p), w in zip(e.dist, e.weights) if p}
                rows.append((mdp.states[s], e.label, dist, ws))
    return WeightedMdp.build(
        names, mdp.states[mdp.initial], mdp.states[mdp.goal], rows, mdp.weight_names,
        add_goal_loop=True, query=mdp.query,
    )


def sure_region(mdp: WeightedMdp) -> WeightedMdp:
    """The part of the model any surely-reaching strategy can ever use."""
    rank, _ = sure_attractor(mdp)
    if mdp.initial not in rank:
        raise NoAttractor(f"Goal cannot be surely reached from {mdp.states[mdp.initial]!r}")
    sub = restrict(mdp, rank)
    # edges leaving the attractor were dropped; states left without edges
    # cannot occur because every attractor state keeps its attractor edge
    return sub


# end components and mean payoff -----------------------------------------------------


def maximal_end_components(mdp: WeightedMdp, region: set[int]) -> list[tuple[frozenset[int], dict[int, list[Edge]]]]:
    edges = {s: [e for e in mdp.edges[s] if _supported(e, region)] for s in region}
    while True:
        changed = False
        for s in list(edges):
            if not edges[s]:
                del edges[s]
                changed = True
        alive = set(edges)
        for s in alive:
            kept = [e for e in edges[s] if _supported(e, alive)]
            if len(kept) != len(edges[s]):
                edges[s] = kept
                changed = True
        g = nx.DiGraph()
        g.add_nodes_from(edges)
        for s, es in edges.items():
            for e in es:
                for t in e.support:
                    if t in edges:
                        g.add_edge(s, t)
        comp_of = {}
        for c, members in enumerate(nx.strongly_connected_components(g)):
            for s in members:
                comp_of[s] = c
        for s in list(edges):
            kept = [e for e in edges[s] if all(comp_of.get(t) == comp_of[s] for t in e.support)]
            if len(kept) != len(edges[s]):
                edges[s] = kept
                changed = True
        if not changed:
            break
    groups: dict[int, set[int]] = {}
    for s in edges:
        groups.setdefault(comp_of[s], set()).add(s)
    return [(frozenset(m), {s: edges[s] for s in m}) for m in groups.values()]


def _stationary(states: list[int], policy: dict[int, Edge]) -> dict[int, Fraction]:
    pos = {s: r for r, s in enumerate(states)}
    n = len(states)
    a = [[Fraction(0)] * n for _ in range(n)]
    for s in states:
        for t, p in policy[s].dist:
            if p:
                a[pos[t]][pos[s]] += p
    for r in range(n):
        a[r][r] -= 1
    a[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    return dict(zip(states, solve_linear(a, b)))


def negative_cycle_class(mdp: WeightedMdp, i: int, members: frozenset[int], edges: dict[int, list[Edge]]):
    """A closed class with a memoryless policy of negative exact mean payoff
    inside the end component, or None if its minimal mean payoff is >= 0."""
    cols = [(s, e) for s in sorted(members) for e in edges[s]]
    if not cols:
        return None
    cost = np.array([float(e.expected_weight(i)) for _, e in cols])
    idx = {s: r for r, s in enumerate(sorted(members))}
    a_eq = np.zeros((len(members) + 1, len(cols)))
    for c, (s, e) in enumerate(cols):
        a_eq[idx[s], c] += 1.0
        for t, p in e.dist:
            a_eq[idx[t], c] -= float(p)
        a_eq[-1, c] = 1.0
    b_eq = np.zeros(len(members) + 1)
    b_eq[-1] = 1.0
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0 or res.fun >= -1e-9:
        return None
    best: dict[int, tuple[float, Edge]] = {}
    for c, (s, e) in enumerate(cols):
        if s not in best or res.x[c] > best[s][0]:
            best[s] = (res.x[c], e)
    policy = {s: e for s, (_, e) in best.items()}
    g = nx.DiGraph()
    g.add_nodes_from(members)
    for s, e in policy.items():
        for t in e.support:
            g.add_edge(s, t)
    cond = nx.condensation(g)
    for c in cond.nodes:
        if cond.out_degree(c) == 0:
            cls = sorted(cond.nodes[c]["members"])
            mu = _stationary(cls, policy)
            gain = sum(mu[s] * policy[s].expected_weight(i) for s in cls)
            if gain < 0:
                return frozenset(cls), {s: policy[s].label for s in cls}
    return None


# stochastic shortest path ------------------------------------------------------------


@dataclass
class SspSolution:
    """Per-state SSP values for one weight, with a continuation policy.

    ``policy`` attains the finite values (proper and optimal) and, on
    ``-inf`` states, steers into a negative-drift class and stays there.
    """

    weight: int
    values: dict[int, SspValue]
    policy: MemorylessStrategy
    pump_classes: list[frozenset[int]] = field(default_factory=list)

    def __getitem__(self, state: int) -> SspValue:
        return self.values[state]


def _q_value(mdp: WeightedMdp, i: int, s: int, e: Edge, values: dict[int, Fraction]) -> Fraction:
    return sum((p * (mdp.weight(i, s, t) + values[t]) for t, p in e.dist if p), Fraction(0))


def _evaluate(mdp: WeightedMdp, i: int, region: list[int], choice: dict[int, str]) -> dict[int, Fraction]:
    pos = {s: r for r, s in enumerate(region)}
    trans = []
    reward = []
    for s in region:
        if s == mdp.goal:
            trans.append([])
            reward.append(Fraction(0))
            continue
        e = mdp.edge(s, choice[s])
        trans.append([(pos[t], p) for t, p in e.dist if p])
        reward.append(e.expected_weight(i))
    vals = solve_chain(trans, reward, {pos[mdp.goal]: Fraction(0)})
    return dict(zip(region, vals))


def _towards(mdp: WeightedMdp, region: set[int], targets: set[int]) -> dict[int, str]:
    """For states of ``region`` outside ``targets``: an edge kept inside
    ``region`` with positive probability of getting closer to ``targets``."""
    dist = {t: 0 for t in targets}
    choice: dict[int, str] = {}
    frontier = set(targets)
    d = 0
    while frontier:
        d += 1
        new = set()
        for s in region:
            if s in dist:
                continue
            for e in mdp.edges[s]:
                if _supported(e, region) and any(t in frontier for t in e.support):
                    choice[s] = e.label
                    new.add(s)
                    break
        for s in new:
            dist[s] = d
        frontier = new
    return choice


def ssp_solve(mdp: WeightedMdp, i: int = W2) -> SspSolution:
    """Classify and compute inf_sigma E(TS_{w_i}) from every state.

    +inf off the almost-sure region; -inf where an end component with
    negative optimal mean payoff can be reached with positive probability
    without leaving the almost-sure region; otherwise the finite value,
    obtained by exact policy iteration from a proper policy.
    """
    asure = set(almost_sure_states(mdp))
    inner = asure - {mdp.goal}
    pump_classes = []
    pump_choice: dict[int, str] = {}
    for members, edges in maximal_end_components(mdp, inner):
        found = negative_cycle_class(mdp, i, members, edges)
        if found is not None:
            cls, labels = found
            pump_classes.append(cls)
            pump_choice.update(labels)
    pumped = set().union(*pump_classes) if pump_classes else set()
    neg = set(pumped)
    if pumped:
        # positive-probability reachability through a.s.-safe edges
        changed = True
        while changed:
            changed = False
            for s in inner - neg:
                if any(_supported(e, asure) and any(t in neg for t in e.support) for e in mdp.edges[s]):
                    neg.add(s)
                    changed = True
        for s, lab in _towards(mdp, asure, pumped).items():
            if s in neg and s not in pumped:
                pump_choice[s] = lab
    finite = sorted(asure - neg)
    fset = set(finite)
    choice = {s: lab for s, lab in _towards(mdp, fset, {mdp.goal}).items()}
    options = {s: [e for e in mdp.edges[s] if _supported(e, fset)] for s in finite if s != mdp.goal}
    while True:
        vals = _evaluate(mdp, i, finite, choice)
        changed = False
        for s, es in options.items():
            current = _q_value(mdp, i, s, mdp.edge(s, choice[s]), vals)
            best_e, best_q = None, current
            for e in es:
                q = _q_value(mdp, i, s, e, vals)
                if q < best_q:
                    best_e, best_q = e, q
            if best_e is not None:
                choice[s] = best_e.label
                changed = True
        if not changed:
            break
    values: dict[int, SspValue] = {}
    for s in range(mdp.n_states):
        if s in fset:
            values[s] = SspValue.finite(vals[s])
        elif s in neg:
            values[s] = SSP_MINUS
        else:
            values[s] = SSP_PLUS
    choice.update(pump_choice)
    return SspSolution(i, values, MemorylessStrategy.pure(mdp, choice), pump_classes)


def ssp_classify(mdp: WeightedMdp, i: int, state: int) -> SspValue:
    return ssp_solve(mdp, i).values[state]


# cycles --------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleReport:
    weight: int
    has_cycles: bool
    all_positive: bool
    all_nonnegative: bool
    all_nonpositive: bool
    min_cycle_weight: Fraction | None
    min_cycle_mean: Fraction | None


def _support_matrix(mdp: WeightedMdp, i: int, sign: int = 1):
    """Integer min-plus matrix over non-Goal states (scaled weights) and the scale."""
    nodes = [s for s in range(mdp.n_states) if s != mdp.goal]
    pos = {s: r for r, s in enumerate(nodes)}
    pairs = [(s, t) for s, t in mdp.pairs() if t != mdp.goal]
    scale = lcm(1, *(mdp.weight(i, s, t).denominator for s, t in pairs))
    mat = np.full((len(nodes), len(nodes)), INF, dtype=np.int64)
    for s, t in pairs:
        w = int(sign * mdp.weight(i, s, t) * scale)
        mat[pos[s], pos[t]] = min(mat[pos[s], pos[t]], w)
    return nodes, mat, scale


def _closed_walk_minimum(mat: np.ndarray) -> int:
    """Minimum weight over closed walks of length 1..n (INF if none)."""
    n = mat.shape[0]
    best = INF
    power = mat.copy()
    for _ in range(n):
        if n:
            best = min(best, int(np.min(np.diag(power))))
        power = minplus_matmul(power, mat)
    return best


def _min_cycle_mean(mat: np.ndarray, scale: int) -> Fraction | None:
    n = mat.shape[0]
    if n == 0:
        return None
    d = [[0] * n]
    for _ in range(n):
        prev = d[-1]
        row = [INF] * n
        for u in range(n):
            if prev[u] >= INF:
                continue
            for v in range(n):
                w = mat[u, v]
                if w < INF and prev[u] + w < row[v]:
                    row[v] = prev[u] + int(w)
        d.append(row)
    best = None
    for v in range(n):
        if d[n][v] >= INF:
            continue
        worst = None
        for k in range(n):
            if d[k][v] >= INF:
                continue
            val = Fraction(d[n][v] - d[k][v], n - k)
            worst = val if worst is None or val > worst else worst
        if worst is not None and (best is None or worst < best):
            best = worst
    return None if best is None else best / scale


def cycle_report(mdp: WeightedMdp, i: int) -> CycleReport:
    """Cycle-sign facts for w_i over the support graph, Goal's loop excluded."""
    _, mat, scale = _support_matrix(mdp, i)
    low = _closed_walk_minimum(mat)
    _, neg, _ = _support_matrix(mdp, i, sign=-1)
    high = _closed_walk_minimum(neg)
    has = low < INF
    pos = (not has) or low > 0
    return CycleReport(
        weight=i,
        has_cycles=has,
        all_positive=pos,
        all_nonnegative=(not has) or low >= 0,
        all_nonpositive=(not has) or -high <= 0,
        min_cycle_weight=Fraction(low, scale) if has and pos else None,
        min_cycle_mean=_min_cycle_mean(mat, scale) if has else None,
    )


def _non_goal_count(mdp: WeightedMdp) -> int:
    return mdp.n_states - 1


def compute_kappa(mdp: WeightedMdp, nu2) -> Fraction:
    """Constant bounding Prob(psi_N) by n/(N-n) * kappa for feasible strategies,
    when every cycle has positive w2-weight."""
    rep = cycle_report(mdp, W2)
    if not rep.all_positive:
        raise AssumptionNotMet("some cycle has non-positive w2-weight")
    if not rep.has_cycles:
        return Fraction(0)
    n = _non_goal_count(mdp)
    low = min((mdp.weight(W2, s, t) for s, t in mdp.pairs()), default=Fraction(0))
    low = min(low, Fraction(0))
    return max(Fraction(0), (Fraction(nu2) - n * low) / rep.min_cycle_weight)


def gap_bound(n: int, kappa: Fraction, horizon: int) -> Fraction | None:
    if horizon <= n:
        return None
    return Fraction(n, horizon - n) * kappa


def w1_envelope(mdp: WeightedMdp, length: int) -> list[Fraction | float]:
    """``env[j]``: least Acc^j_{w1} over walks from the initial state whose
    first j states avoid Goal (the last may be Goal); ``inf`` if none."""
    goal = mdp.goal
    if mdp.initial == goal:
        return [math.inf] * (length + 1)
    env: list[Fraction | float] = [Fraction(0)]
    cur: dict[int, Fraction] = {mdp.initial: Fraction(0)}
    pairs: dict[int, list[tuple[int, Fraction]]] = {}
    for s, t in mdp.pairs():
        pairs.setdefault(s, []).append((t, mdp.weight(W1, s, t)))
    for _ in range(length):
        nxt: dict[int, Fraction] = {}
        best: Fraction | float = math.inf
        for s, acc in cur.items():
            for t, w in pairs.get(s, ()):
                v = acc + w
                best = min(best, v)
                if t != goal and (t not in nxt or v < nxt[t]):
                    nxt[t] = v
        env.append(best)
        cur = nxt
    return env


@dataclass(frozen=True)
class HorizonCertificate:
    n0: int
    closed_form_bound: int
    envelope: tuple


def compute_N0(mdp: WeightedMdp, nu1) -> HorizonCertificate:
    """Horizon after which no Goal-avoiding prefix can stay below nu1, when
    every cycle has positive w1-weight; certified by the exact envelope."""
    rep = cycle_report(mdp, W1)
    if not rep.all_positive:
        raise AssumptionNotMet("some cycle has non-positive w1-weight")
    nu1 = Fraction(nu1)
    n = _non_goal_count(mdp)
    if not rep.has_cycles:
        bound = n + 1  # a walk holds at most n non-Goal states
    else:
        low = min(min((mdp.weight(W1, s, t) for s, t in mdp.pairs()), default=Fraction(0)), Fraction(0))
        need = max(Fraction(0), (nu1 - n * low) / rep.min_cycle_weight)
        bound = n * math.ceil(need) + n
    env = w1_envelope(mdp, bound)
    n0 = bound
    while n0 > 0 and env[n0 - 1] >= nu1:
        n0 -= 1
    return HorizonCertificate(n0, bound, tuple(env))


__all__ = [
    "AssumptionNotMet",
    "CycleReport",
    "HorizonCertificate",
    "NoAttractor",
    "SspSolution",
    "SspValue",
    "almost_sure_states",
    "attractor_strategy",
    "compute_N0",
    "compute_kappa",
    "cycle_report",
    "gap_bound",
    "maximal_end_components",
    "restrict",
    "ssp_classify",
    "ssp_solve",
    "sure_attractor",
    "sure_region",
    "w1_envelope",
]
