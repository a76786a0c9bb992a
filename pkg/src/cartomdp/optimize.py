"""The two tree programs and their solvers.

On the hat tree, a tree strategy is a vector of branch probabilities
p[n, e]. The objective P is the probability of the bad leaves (phi^- or,
for the upper variant, phi^- and depth-N non-Goal leaves) and Q the expected
w2 value (accumulated weight plus terminal shortest-path value). Both are
multilinear in p; in occupation measures x[n, e] = reach(n) * p[n, e] they are
linear, which is what :func:`solve_lp` exploits.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .kernels import tree_eval_grad
from .model import W2, WeightedMdp
from .semantics import expectation_ts, horizon_profile, is_sure
from .strategy import CompositeStrategy, MemorylessStrategy, Strategy, TreeStrategy
from .unfold import BOTTOM, HAT, INFEASIBLE, UnfoldedTree

UPPER = "upper"
LOWER = "lower"

BRUTE = "brute"
LP = "lp"
GRADIENT = "gradient"
PURE = "pure"

DEFAULT_CAP = 12
DEFAULT_GRID = 16


class InfeasibleProblem(ValueError):
    """No tree strategy satisfies Q < nu2."""


class InfeasibleAtResolution(InfeasibleProblem):
    """No grid point satisfies Q < nu2 (the problem itself may be feasible)."""


class ProblemTooLarge(ValueError):
    pass


class NotStrictlyFeasible(ValueError):
    pass


class SwitchNotFound(ProblemTooLarge):
    """No switching step up to the search limit (typically a tiny mass
    pumping a -inf component, which needs very many rounds)."""


Table = dict[int, dict[str, Fraction]]


@dataclass
class PolyProblem:
    tree: UnfoldedTree
    variant: str
    nu1: Fraction
    nu2: Fraction
    leaf_p: dict[int, Fraction]
    leaf_q: dict[int, Fraction]
    marks: dict[int, str]
    allowed: dict[int, tuple[str, ...]]
    doomed: set[tuple[int, str]]
    bottomable: set[int]
    var_index: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        tree = self.tree
        self._pos = {key: j for j, key in enumerate(self.var_index)}
        var_ptr = [0]
        child_ptr = [0]
        child: list[int] = []
        prob: list[float] = []
        for node in tree.nodes:
            for lab, kids in node.children.items():
                for c, p in kids:
                    child.append(c)
                    prob.append(float(p))
                child_ptr.append(len(child))
            var_ptr.append(var_ptr[-1] + len(node.children))
        self._arrays = (
            np.array(var_ptr, dtype=np.int64),
            np.array(child_ptr, dtype=np.int64),
            np.array(child, dtype=np.int64),
            np.array(prob, dtype=np.float64),
        )
        m = len(tree.nodes)
        self._leaf_pf = np.zeros(m)
        self._leaf_qf = np.zeros(m)
        for v, val in self.leaf_p.items():
            self._leaf_pf[v] = float(val)
        for v, val in self.leaf_q.items():
            self._leaf_qf[v] = float(val)

    # -- shape ------------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.var_index)

    @property
    def dimension(self) -> int:
        """Free parameters: allowed branches minus one, summed over decision nodes."""
        return sum(max(len(labs) - 1, 0) for labs in self.allowed.values())

    @property
    def is_bottom(self) -> bool:
        """Some admissible strategy reaches a -inf leaf, so Q is unbounded below."""
        return self.tree.root in self.bottomable

    def groups(self) -> list[list[int]]:
        """Variable positions per decision node, allowed branches only."""
        return [[self._pos[(v, lab)] for lab in labs] for v, labs in self.allowed.items() if labs]

    # -- evaluation ---------------------------------------------------------------

    def vector(self, table: Table) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for v, dist in table.items():
            for lab, p in dist.items():
                x[self._pos[(v, lab)]] = float(p)
        return x

    def table(self, x) -> dict[int, dict[str, float]]:
        out: dict[int, dict[str, float]] = {}
        for (v, lab), val in zip(self.var_index, x):
            out.setdefault(v, {})[lab] = float(val)
        return out

    def value_and_grad(self, x) -> tuple[float, float, np.ndarray, np.ndarray]:
        """Float P, Q and their gradients (multilinear extension, any x)."""
        return tree_eval_grad(*self._arrays, np.asarray(x, dtype=np.float64), self._leaf_pf, self._leaf_qf)

    def evaluate(self, table: Table) -> tuple[Fraction, Fraction | float]:
        """Exact (P, Q); Q is +inf if an infeasible leaf gets mass, -inf for a bottom leaf."""
        tree = self.tree
        vp: dict[int, Fraction] = {}
        vq: dict[int, Fraction] = {}
        plus: set[int] = set()
        minus: set[int] = set()
        for node in reversed(tree.nodes):
            v = node.id
            if not node.children:
                vp[v] = self.leaf_p[v]
                vq[v] = self.leaf_q.get(v, Fraction(0))
                mark = self.marks.get(v)
                if mark == INFEASIBLE:
                    plus.add(v)
                elif mark == BOTTOM:
                    minus.add(v)
                continue
            dist = table.get(v)
            if dist is None:
                vp[v] = vq[v] = Fraction(0)
                continue
            tp = tq = Fraction(0)
            for lab, w in dist.items():
                if not w:
                    continue
                for c, p in node.children[lab]:
                    tp += w * p * vp[c]
                    tq += w * p * vq[c]
                    if c in plus:
                        plus.add(v)
                    if c in minus:
                        minus.add(v)
            vp[v], vq[v] = tp, tq
        r = tree.root
        if r in plus:
            return vp[r], math.inf
        if r in minus:
            return vp[r], -math.inf
        return vp[r], vq[r]

    def occupation(self, table: Table) -> dict[tuple[int, str], Fraction]:
        reach = {self.tree.root: Fraction(1)}
        occ: dict[tuple[int, str], Fraction] = {}
        for node in self.tree.nodes:
            r = reach.get(node.id)
            if not r or not node.children:
                continue
            for lab, w in table.get(node.id, {}).items():
                if not w:
                    continue
                occ[(node.id, lab)] = r * w
                for c, p in node.children[lab]:
                    reach[c] = reach.get(c, Fraction(0)) + r * w * p
        return occ

    def from_occupation(self, occ: dict[tuple[int, str], Fraction], fallback: Table) -> Table:
        mass: dict[int, Fraction] = {}
        for (v, _), val in occ.items():
            mass[v] = mass.get(v, Fraction(0)) + val
        out: Table = {}
        for v in self.allowed:
            if mass.get(v):
                out[v] = {lab: occ[(v, lab)] / mass[v] for lab in self.allowed[v] if occ.get((v, lab))}
            elif v in fallback:
                out[v] = dict(fallback[v])
        return out

    def mix(self, first: Table, second: Table, theta: Fraction) -> Table:
        """Strategy whose occupation measure is (1-theta)*first + theta*second;
        P and Q are mixed with the same weights."""
        a = self.occupation(first)
        b = self.occupation(second)
        occ = {key: (1 - theta) * a.get(key, Fraction(0)) + theta * b.get(key, Fraction(0)) for key in set(a) | set(b)}
        return self.from_occupation(occ, first)

    # -- pure optima ---------------------------------------------------------------

    def _induction(self, key) -> Table:
        """Pure strategy minimising ``key(p, q)`` node by node (exact)."""
        tree = self.tree
        val: dict[int, tuple] = {}
        out: Table = {}
        for node in reversed(tree.nodes):
            v = node.id
            if not node.children:
                mark = self.marks.get(v)
                q = -math.inf if mark == BOTTOM else (math.inf if mark == INFEASIBLE else self.leaf_q.get(v, Fraction(0)))
                val[v] = (self.leaf_p[v], q)
                continue
            best = None
            for lab in self.allowed.get(v, ()):
                p = sum((w * val[c][0] for c, w in node.children[lab]), Fraction(0))
                qs = [(w, val[c][1]) for c, w in node.children[lab]]
                if any(q == math.inf for _, q in qs):
                    continue
                q = -math.inf if any(q == -math.inf for _, q in qs) else sum((w * q for w, q in qs), Fraction(0))
                cand = (key(p, q), lab, p, q)
                if best is None or cand[0] < best[0]:
                    best = cand
            if best is None:
                val[v] = (Fraction(0), math.inf)
                continue
            out[v] = {best[1]: Fraction(1)}
            val[v] = (best[2], best[3])
        return out

    def min_q_table(self) -> Table:
        return self._induction(lambda p, q: (q, p))

    def min_p_table(self) -> Table:
        return self._induction(lambda p, q: (p, q))

    def bottom_table(self) -> Table:
        """Pure strategy giving positive mass to a -inf leaf."""
        out = self.min_q_table()
        for v, labs in self.allowed.items():
            for lab in labs:
                if any(c in self.bottomable for c, _ in self.tree.nodes[v].children[lab]):
                    out[v] = {lab: Fraction(1)}
                    break
        return out


def build_problem(tree: UnfoldedTree, nu1, nu2, variant: str = UPPER) -> PolyProblem:
    """The tree program for ``variant`` (UPPER: phi^- or psi, LOWER: phi^-)."""
    if tree.variant != HAT:
        raise ValueError("build_problem expects a hat tree")
    if variant not in (UPPER, LOWER):
        raise ValueError(f"unknown variant {variant!r}")
    nu1, nu2 = Fraction(nu1), Fraction(nu2)
    leaf_p: dict[int, Fraction] = {}
    leaf_q: dict[int, Fraction] = {}
    marks: dict[int, str] = {}
    for node in tree.nodes:
        if node.children:
            continue
        if node.state == tree.goal:
            leaf_p[node.id] = Fraction(int(node.acc[0] < nu1))
        else:
            leaf_p[node.id] = Fraction(int(variant == UPPER))
            mark = tree.mark(node.id)
            if mark:
                marks[node.id] = mark
        leaf_q[node.id] = node.acc[1] + tree.terminal_weight(node.id)
    # doomed: every admissible strategy giving the node mass has Q = +inf
    doomed_nodes = {v for v, m in marks.items() if m == INFEASIBLE}
    doomed: set[tuple[int, str]] = set()
    allowed: dict[int, tuple[str, ...]] = {}
    bottomable = {v for v, m in marks.items() if m == BOTTOM}
    for node in reversed(tree.nodes):
        if not node.children:
            continue
        ok = []
        for lab, kids in node.children.items():
            if any(c in doomed_nodes for c, _ in kids):
                doomed.add((node.id, lab))
            else:
                ok.append(lab)
                if any(c in bottomable for c, _ in kids):
                    bottomable.add(node.id)
        allowed[node.id] = tuple(ok)
        if not ok:
            doomed_nodes.add(node.id)
    var_index = [(n.id, lab) for n in tree.nodes for lab in n.children]
    allowed = {v: allowed[v] for v in sorted(allowed)}
    return PolyProblem(tree, variant, nu1, nu2, leaf_p, leaf_q, marks, allowed, doomed, bottomable, var_index)


@dataclass
class SolveResult:
    """Solver output.

    ``value`` is the reported optimum, ``witness_p``/``witness_q`` the exact
    values of the returned strategy (``witness_q < nu2`` always holds) and
    ``alpha`` the one-sided slack ``witness_p - value``. ``lower_bound``, when
    set, is a bound below the true infimum usable for negative verdicts.
    """

    value: Fraction
    witness: TreeStrategy
    witness_p: Fraction
    witness_q: Fraction | float
    alpha: Fraction
    method: str
    lower_bound: Fraction | None = None
    bottom: bool = False

    @property
    def table(self) -> Table:
        return self.witness.table


def _check_feasible(problem: PolyProblem) -> Table:
    if problem.tree.root in problem.bottomable:
        return problem.bottom_table()
    low = problem.min_q_table()
    _, q = problem.evaluate(low)
    if not q < problem.nu2:
        raise InfeasibleProblem(f"least achievable Q is {q}, not below nu2 = {problem.nu2}")
    return low


def make_strict(problem: PolyProblem, table: Table, alpha: Fraction) -> Table:
    """Nudge ``table`` towards the least-Q strategy until Q < nu2 exactly."""
    p, q = problem.evaluate(table)
    if q < problem.nu2:
        return table
    low = problem.min_q_table()
    _, qmin = problem.evaluate(low)
    if not qmin < problem.nu2:
        raise InfeasibleProblem("no strictly feasible strategy")
    if q == math.inf:
        return low
    theta0 = (q - problem.nu2) / (q - qmin)
    theta = min(Fraction(1), 2 * theta0 if theta0 > 0 else Fraction(alpha) / 4 or Fraction(1, 10**6))
    out = problem.mix(table, low, theta)
    assert problem.evaluate(out)[1] < problem.nu2
    return out


def _result(problem, table, value, method, lower_bound=None) -> SolveResult:
    p, q = problem.evaluate(table)
    value = min(Fraction(value), p)
    return SolveResult(value, TreeStrategy(problem.tree, table), p, q, p - value, method, lower_bound, problem.is_bottom)


def _solve_bottom(problem: PolyProblem, alpha: Fraction, method: str) -> SolveResult:
    """Q is unbounded below: the value is the unconstrained minimum of P,
    approached by sending a small mass to a -inf leaf."""
    best = problem.min_p_table()
    value, _ = problem.evaluate(best)
    theta = min(Fraction(1), Fraction(alpha) / 2) or Fraction(1, 2)
    table = problem.mix(best, problem.bottom_table(), theta)
    return _result(problem, table, value, method, lower_bound=value)


def bottom_witness(problem: PolyProblem, epsilon) -> Table | None:
    """A bottom-reaching table whose P stays below ``epsilon``, sending as
    much mass as that allows towards the -inf leaf (more mass means fewer
    pumping rounds later). None if ``epsilon`` does not exceed min P."""
    best = problem.min_p_table()
    p_min, _ = problem.evaluate(best)
    bottom = problem.bottom_table()
    p_bot, _ = problem.evaluate(bottom)
    epsilon = Fraction(epsilon)
    if p_bot < epsilon:
        return bottom
    if not p_min < epsilon:
        return None
    theta = min(Fraction(1, 2), (epsilon - p_min) / (p_bot - p_min) / 2)
    return problem.mix(best, bottom, theta)


def _rationalise(problem: PolyProblem, x, fallback: Table, denom: int = 10**6) -> Table:
    out: Table = {}
    for v, labs in problem.allowed.items():
        if not labs:
            continue
        raw = {lab: max(float(x[problem._pos[(v, lab)]]), 0.0) for lab in labs}
        total = sum(raw.values())
        if total <= 1e-12:
            if v in fallback:
                out[v] = dict(fallback[v])
            continue
        fr = {lab: Fraction(val / total).limit_denominator(denom) for lab, val in raw.items()}
        s = sum(fr.values())
        if s == 0:
            out[v] = dict(fallback.get(v, {labs[0]: Fraction(1)}))
            continue
        out[v] = {lab: val / s for lab, val in fr.items() if val}
    return out


# -- occupation-measure LP ------------------------------------------------------------


def _occupation_lp(problem: PolyProblem):
    """Solve the occupation-measure LP; returns (behavioural x, optimum, dual of Q)."""
    cols = [(v, lab) for v, labs in problem.allowed.items() for lab in labs]
    col = {key: j for j, key in enumerate(cols)}
    rows = {v: r for r, v in enumerate(v for v, labs in problem.allowed.items() if labs)}
    cp = np.zeros(len(cols))
    cq = np.zeros(len(cols))
    ri, ci, vals = [], [], []
    nodes = problem.tree.nodes
    for (v, lab), j in col.items():
        ri.append(rows[v])
        ci.append(j)
        vals.append(1.0)
        for c, p in nodes[v].children[lab]:
            if c in rows:
                ri.append(rows[c])
                ci.append(j)
                vals.append(-float(p))
            elif not nodes[c].children:
                cp[j] += float(p) * float(problem.leaf_p[c])
                cq[j] += float(p) * float(problem.leaf_q.get(c, 0))
    a_eq = coo_matrix((vals, (ri, ci)), shape=(len(rows), len(cols))).tocsr()
    b_eq = np.zeros(len(rows))
    b_eq[rows[problem.tree.root]] = 1.0
    res = linprog(
        cp, A_ub=cq.reshape(1, -1), b_ub=[float(problem.nu2)], A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise InfeasibleProblem(f"LP failed: {res.message}")
    x = np.zeros(problem.n_vars)
    for (v, lab), j in col.items():
        x[problem._pos[(v, lab)]] = res.x[j]
    dual = max(0.0, -float(res.ineqlin.marginals[0]))
    return x, max(float(res.fun), 0.0), dual


def solve_lp(problem: PolyProblem, alpha=Fraction(1, 10**6)) -> SolveResult:
    """Optimum up to LP tolerance, via occupation measures.

    ``lower_bound`` is the LP optimum minus a safety margin; the witness is
    the rationalised LP solution made strictly feasible and re-evaluated
    exactly.
    """
    alpha = Fraction(alpha)
    start = _check_feasible(problem)
    if problem.is_bottom:
        return _solve_bottom(problem, alpha, LP)
    pure = problem.min_p_table()
    pp, pq = problem.evaluate(pure)
    if pq < problem.nu2:
        return _result(problem, pure, pp, LP, lower_bound=pp)
    x, fun, _ = _occupation_lp(problem)
    table = make_strict(problem, _rationalise(problem, x, start), alpha)
    # float optimum minus a safety margin, rounded down onto a 1e-9 grid
    bound = max(Fraction(0), Fraction(math.floor((fun - 1e-7) * 10**9), 10**9))
    return _result(problem, table, Fraction(fun).limit_denominator(10**9), LP, lower_bound=bound)


# -- exhaustive grid search -------------------------------------------------------------


def _compositions(total: int, parts: int):
    """All ways to write ``total`` as an ordered sum of ``parts`` naturals,
    vertices first (most concentrated splits lead)."""
    combos = []
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cut + (total + parts - 1,):
            out.append(c - prev - 1)
            prev = c
        combos.append(tuple(out))
    combos.sort(key=lambda comp: -max(comp))
    return combos


def _lagrangian_bounds(problem: PolyProblem, lams) -> list[dict[int, Fraction]]:
    """Per multiplier, the least conditional value of P + lam*Q below each node."""
    out = []
    for lam in lams:
        low: dict[int, Fraction] = {}
        for node in reversed(problem.tree.nodes):
            v = node.id
            if not node.children:
                low[v] = problem.leaf_p[v] + lam * problem.leaf_q.get(v, Fraction(0))
                continue
            labs = problem.allowed.get(v, ())
            low[v] = min(
                (sum((p * low[c] for c, p in node.children[lab]), Fraction(0)) for lab in labs), default=Fraction(0)
            )
        out.append(low)
    return out


def _least_q(problem: PolyProblem) -> dict[int, Fraction]:
    """Per node, the least conditional Q over admissible strategies."""
    low: dict[int, Fraction] = {}
    for node in reversed(problem.tree.nodes):
        v = node.id
        if not node.children:
            low[v] = problem.leaf_q.get(v, Fraction(0))
            continue
        labs = problem.allowed.get(v, ())
        low[v] = min((sum((p * low[c] for c, p in node.children[lab]), Fraction(0)) for lab in labs), default=Fraction(0))
    return low


def _round_to_grid(problem: PolyProblem, x, grid: int) -> Table:
    out: Table = {}
    for v, labs in problem.allowed.items():
        if not labs:
            continue
        raw = np.array([max(float(x[problem._pos[(v, lab)]]), 0.0) for lab in labs])
        raw = raw / raw.sum() if raw.sum() > 0 else np.eye(len(labs))[0]
        units = np.floor(raw * grid).astype(int)
        order = np.argsort(-(raw * grid - units), kind="stable")
        for j in order[: grid - units.sum()]:
            units[j] += 1
        out[v] = {lab: Fraction(int(k), grid) for lab, k in zip(labs, units) if k}
    return out


def solve_brute(
    problem: PolyProblem, grid: int = DEFAULT_GRID, cap: int | None = DEFAULT_CAP, max_visits: int = 2_000_000
) -> SolveResult:
    """Best grid strategy (every branch probability a multiple of 1/grid).

    Exhaustive depth-first enumeration of the grid in exact arithmetic. A
    partial assignment is cut only when no completion can beat the
    incumbent: its Q plus the least reachable Q must stay below nu2, and
    for every multiplier lam >= 0 its P plus the least reachable
    P + lam*(Q - nu2) must stay below the incumbent's P. ``alpha`` of the
    result is a Lipschitz-times-spacing estimate of the gap to the
    continuous infimum, not a certificate.
    """
    if cap is not None and problem.dimension > cap:
        raise ProblemTooLarge(f"{problem.dimension} free variables exceed the cap of {cap}")
    estimate = Fraction(problem.tree.depth, grid)
    start = _check_feasible(problem)
    if problem.is_bottom:
        return _solve_bottom(problem, Fraction(1, grid), BRUTE)
    pure = problem.min_p_table()
    pp, pq = problem.evaluate(pure)
    if pq < problem.nu2:
        # a vertex of the grid attains the unconstrained minimum
        res = _result(problem, pure, pp, BRUTE, lower_bound=pp)
        res.alpha = Fraction(0)
        return res
    nodes = problem.tree.nodes
    nu2 = problem.nu2
    x_lp, _, dual = _occupation_lp(problem)
    lam_star = Fraction(dual).limit_denominator(10**6)
    lams = sorted({Fraction(0), lam_star, lam_star / 2, 2 * lam_star})
    bounds = _lagrangian_bounds(problem, lams)
    low_q = _least_q(problem)
    incumbent = start
    rounded = _round_to_grid(problem, x_lp, grid)
    if problem.evaluate(rounded)[1] < nu2 and problem.evaluate(rounded)[0] < problem.evaluate(start)[0]:
        incumbent = rounded
    best = {"p": problem.evaluate(incumbent)[0], "table": dict(incumbent)}
    comps: dict[int, list] = {}
    visits = 0
    table: Table = {}
    n_l = len(lams)

    def expand(pending, fp, fq, bl, bq):
        # pending: tuple of (node, reach); bl[i] / bq: bound mass of pending nodes
        nonlocal visits
        visits += 1
        if visits > max_visits:
            raise ProblemTooLarge(f"grid search exceeded {max_visits} partial assignments")
        if not pending:
            if fq < nu2 and fp < best["p"]:
                best.update(p=fp, table=dict(table))
            return
        (v, reach), rest = pending[0], pending[1:]
        bl = [bl[i] - reach * bounds[i][v] for i in range(n_l)]
        bq -= reach * low_q[v]
        labs = problem.allowed[v]
        if len(labs) not in comps:
            comps[len(labs)] = _compositions(grid, len(labs))
        for comp in comps[len(labs)]:
            p2, q2, b2, b2q = fp, fq, list(bl), bq
            new: dict[int, Fraction] = {}
            dist = {}
            for lab, k in zip(labs, comp):
                if not k:
                    continue
                w = Fraction(k, grid)
                dist[lab] = w
                for c, p in nodes[v].children[lab]:
                    r = reach * w * p
                    if nodes[c].children:
                        new[c] = new.get(c, Fraction(0)) + r
                        for i in range(n_l):
                            b2[i] += r * bounds[i][c]
                        b2q += r * low_q[c]
                    else:
                        p2 += r * problem.leaf_p[c]
                        q2 += r * problem.leaf_q.get(c, Fraction(0))
            if not q2 + b2q < nu2:
                continue
            if any(p2 + lams[i] * (q2 - nu2) + b2[i] >= best["p"] for i in range(n_l)):
                continue
            table[v] = dist
            expand(rest + tuple(new.items()), p2, q2, b2, b2q)
            del table[v]

    root = problem.tree.root
    expand(((root, Fraction(1)),), Fraction(0), Fraction(0), [b[root] for b in bounds], low_q[root])
    out = best["table"]
    for v, dist in start.items():
        out.setdefault(v, dist)
    res = _result(problem, out, best["p"], BRUTE)
    res.alpha = estimate
    return res


# -- projected gradient ------------------------------------------------------------------


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(y) + 1)
    rho = np.nonzero(u * k > css - 1)[0][-1]
    tau = (css[rho] - 1) / (rho + 1)
    return np.maximum(y - tau, 0.0)


def _project(x: np.ndarray, groups) -> np.ndarray:
    out = np.zeros_like(x)
    for g in groups:
        out[g] = project_simplex(x[g])
    return out


def solve_gradient(
    problem: PolyProblem,
    restarts: int = 4,
    tol: float = 1e-9,
    seed: int = 0,
    alpha=Fraction(1, 10**6),
    iterations: int = 300,
) -> SolveResult:
    """Log-barrier projected gradient on the product of simplices.

    The barrier weight shrinks geometrically; each restart starts from the
    least-Q strategy perturbed at random. The best float point is rounded to
    rationals, made strictly feasible and re-evaluated exactly. The value is
    that of the witness (no optimality certificate).
    """
    alpha = Fraction(alpha)
    start = _check_feasible(problem)
    if problem.is_bottom:
        return _solve_bottom(problem, alpha, GRADIENT)
    pure = problem.min_p_table()
    pp, pq = problem.evaluate(pure)
    if pq < problem.nu2:
        return _result(problem, pure, pp, GRADIENT, lower_bound=pp)
    nu2 = float(problem.nu2)
    groups = problem.groups()
    rng = random.Random(seed)
    x0 = problem.vector(start)
    best_x, best_p = None, math.inf

    def barrier(x, mu):
        p, q, gp, gq = problem.value_and_grad(x)
        slack = nu2 - q
        if slack <= 0:
            return math.inf, None, p, q
        return p - mu * math.log(slack), gp + mu * gq / slack, p, q

    for r in range(max(restarts, 1)):
        x = x0.copy()
        if r:
            noise = np.zeros_like(x)
            for g in groups:
                noise[g] = np.random.default_rng(rng.randrange(2**32)).dirichlet(np.ones(len(g)))
            lam = 0.5
            while lam > 1e-6:
                cand = (1 - lam) * x0 + lam * noise
                if problem.value_and_grad(cand)[1] < nu2:
                    x = cand
                    break
                lam /= 2
        mu = 0.1
        step = 1.0
        while mu > tol:
            f, g, _, _ = barrier(x, mu)
            for _ in range(iterations):
                moved = False
                while step > 1e-12:
                    cand = _project(x - step * g, groups)
                    fc, gc, _, _ = barrier(cand, mu)
                    if fc < f - 1e-4 * float(np.dot(g, x - cand)):
                        x, f, g = cand, fc, gc
                        moved = True
                        step *= 2
                        break
                    step /= 2
                if not moved or step <= 1e-12:
                    step = 1.0
                    break
            mu *= 0.2
        p, q, _, _ = problem.value_and_grad(x)
        if q < nu2 and p < best_p:
            best_x, best_p = x, p
    if best_x is None:
        raise InfeasibleProblem("no feasible point found by any restart")
    snapped = best_x.copy()
    for g in groups:
        j = int(np.argmax(snapped[g]))
        if snapped[g][j] > 1 - 1e-6:
            snapped[g] = 0.0
            snapped[g[j]] = 1.0
    table = make_strict(problem, _rationalise(problem, snapped, start), alpha)
    res = _result(problem, table, problem.evaluate(table)[0], GRADIENT)
    res.alpha = alpha
    return res


def solve(problem: PolyProblem, method: str = LP, **kw) -> SolveResult:
    if method == LP:
        return solve_lp(problem, **{k: v for k, v in kw.items() if k == "alpha"})
    if method == BRUTE:
        return solve_brute(problem, **{k: v for k, v in kw.items() if k in ("grid", "cap")})
    if method == GRADIENT:
        return solve_gradient(problem, **{k: v for k, v in kw.items() if k in ("restarts", "seed", "alpha")})
    raise ValueError(f"unknown method {method!r}")


# -- from a tree witness to a strategy on the model ---------------------------------------


def _attractor_values(mdp: WeightedMdp, attractor: MemorylessStrategy, i: int = W2) -> dict[int, Fraction]:
    """Exact E(TS_{w_i}) from each state under a sure-reaching memoryless strategy."""
    labels = attractor.labels()
    vals = {mdp.goal: Fraction(0)}
    pending = set(labels) - {mdp.goal}
    while pending:
        done = [s for s in pending if all(t in vals for t in mdp.edge(s, labels[s]).support)]
        if not done:
            raise ValueError("attractor strategy does not surely reach Goal")
        for s in done:
            e = mdp.edge(s, labels[s])
            vals[s] = sum((p * (mdp.weight(i, s, t) + vals[t]) for t, p in e.dist if p), Fraction(0))
            pending.discard(s)
    return vals


@dataclass
class Assembly:
    strategy: CompositeStrategy
    k: int
    eta: Fraction | None
    expectation: Fraction


def find_switch_step(
    mdp: WeightedMdp,
    sigma: Strategy,
    sigma_q: Fraction | float,
    nu2: Fraction,
    attractor: MemorylessStrategy,
    bound: Fraction,
    make,
    min_k: int = 0,
    max_k: int = 100_000,
) -> Assembly:
    """Least k >= min_k after which switching from ``sigma`` to ``attractor``
    keeps the expectation below nu2, found with the two tests of the
    construction (|E(Acc^k) - E(sigma)| < eta/2, mass outside Goal below
    eta/(2*bound)) plus an exact evaluation of the switched strategy.
    ``make(k)`` builds the switched strategy.
    """
    bottom = sigma_q == -math.inf
    if bottom:
        eta = None
    else:
        if not sigma_q < nu2:
            raise NotStrictlyFeasible(f"Q = {sigma_q} is not below nu2 = {nu2}")
        eta = nu2 - sigma_q
    att_vals = _attractor_values(mdp, attractor)
    for k, acc, alive, by_state in horizon_profile(mdp, sigma, W2):
        if k > max_k:
            raise SwitchNotFound(f"no switching step found up to k = {max_k}")
        if k < min_k:
            continue
        # exact expectation of the switched strategy
        exact = acc + sum((m * att_vals[s] for s, m in by_state.items()), Fraction(0))
        if not exact < nu2:
            continue
        if not bottom and not (abs(acc - sigma_q) < eta / 2 and alive < eta / (2 * bound)):
            continue
        strat = make(k)
        if not is_sure(mdp, strat):
            continue
        e = expectation_ts(mdp, strat, W2)
        if e < nu2:
            return Assembly(strat, k, eta, e)
    raise RuntimeError("unreachable")


def assemble_sigma_N_k(
    mdp: WeightedMdp,
    witness: TreeStrategy,
    witness_q: Fraction | float,
    nu2,
    continuation: MemorylessStrategy,
    attractor: MemorylessStrategy,
    bound: Fraction,
    max_k: int = 100_000,
) -> Assembly:
    """Play the tree witness, continue optimally, and switch to the attractor at step k.

    k is the least value >= N passing :func:`find_switch_step`; with a
    -inf witness only the exact expectation test applies. The result is
    re-verified (sure reachability, exact expectation).
    """
    depth = witness.tree.depth
    sigma_n = CompositeStrategy(witness, depth, continuation)
    return find_switch_step(
        mdp,
        sigma_n,
        witness_q,
        Fraction(nu2),
        attractor,
        bound,
        lambda k: CompositeStrategy(witness, k, attractor, continuation),
        min_k=depth,
        max_k=max_k,
    )


__all__ = [
    "Assembly",
    "BRUTE",
    "GRADIENT",
    "InfeasibleAtResolution",
    "InfeasibleProblem",
    "LOWER",
    "LP",
    "NotStrictlyFeasible",
    "PolyProblem",
    "ProblemTooLarge",
    "SolveResult",
    "SwitchNotFound",
    "UPPER",
    "assemble_sigma_N_k",
    "bottom_witness",
    "build_problem",
    "find_switch_step",
    "make_strict",
    "project_simplex",
    "solve",
    "solve_brute",
    "solve_gradient",
    "solve_lp",
]
