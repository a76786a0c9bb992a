"""Sequences of tree optima, epsilon verdicts and the completeness checks.

For each horizon N the lower program (bad = reaching Goal below nu1) and
the upper program (bad also includes not reaching Goal within N steps)
are solved on the hat tree. Lower values only grow with N and upper
values only shrink; every epsilon below some lower value has no solution,
and every epsilon above the exact bad-probability of some upper witness
has one, built by :func:`assemble_sigma_N_k` and verified exactly.

All of this runs on the part of the model inside the sure attractor of
Goal: strategies that surely reach Goal never leave it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .analysis import (
    AssumptionNotMet,
    NoAttractor,
    SspSolution,
    attractor_strategy,
    compute_kappa,
    compute_N0,
    cycle_report,
    gap_bound,
    ssp_solve,
    sure_region,
)
from .model import W1, W2, WeightedMdp
from .optimize import (
    LOWER,
    LP,
    UPPER,
    Assembly,
    SolveResult,
    SwitchNotFound,
    assemble_sigma_N_k,
    bottom_witness,
    build_problem,
    solve,
)
from .semantics import DEFAULT_BUDGET, BudgetExceeded, expectation_ts, is_sure, ts_probability_at_least
from .strategy import MemorylessStrategy, Strategy, TreeStrategy
from .unfold import hat, unfold

SOLUTION = "solution"
NO_SOLUTION = "no-solution"
UNKNOWN = "unknown"

POSITIVE_W2 = "positive-w2"
POSITIVE_W1 = "positive-w1"
NONE_APPLICABLE = "none"


class GlobalInfeasible(ValueError):
    """No strategy meets the expectation bound while surely reaching Goal,
    so the problem has no solution for any epsilon."""


@dataclass
class Context:
    """Everything a verdict needs besides the records."""

    original: WeightedMdp
    model: WeightedMdp
    nu1: Fraction
    nu2: Fraction
    ssp: SspSolution
    attractor: MemorylessStrategy
    bound: Fraction


def prepare(mdp: WeightedMdp, nu1, nu2) -> Context:
    nu1, nu2 = Fraction(nu1), Fraction(nu2)
    try:
        model = sure_region(mdp)
    except NoAttractor as exc:
        raise GlobalInfeasible(str(exc)) from None
    ssp = ssp_solve(model, W2)
    start = ssp[model.initial]
    if not start.number < nu2:
        raise GlobalInfeasible(f"least expected w2 is {start}, not below nu2 = {nu2}")
    att, bound = attractor_strategy(model, W2)
    return Context(mdp, model, nu1, nu2, ssp, att, bound)


@dataclass
class CartographyRecord:
    N: int
    lower: SolveResult
    upper: SolveResult
    gap_bound: Fraction | None = None
    stationary: bool = False

    @property
    def lower_value(self) -> Fraction:
        return self.lower.value

    @property
    def upper_value(self) -> Fraction:
        return self.upper.value

    @property
    def lower_certified(self) -> Fraction:
        """A value below v_N usable for negative verdicts."""
        lb = self.lower.lower_bound
        return lb if lb is not None else max(Fraction(0), self.lower.value - self.lower.alpha)

    @property
    def alpha(self) -> Fraction:
        return max(self.lower.alpha, self.upper.alpha)


@dataclass
class CompletenessReport:
    kind: str
    kappa: Fraction | None = None
    n: int | None = None
    n0: int | None = None
    detail: str = ""

    def gap(self, horizon: int) -> Fraction | None:
        if self.kind != POSITIVE_W2:
            return None
        return gap_bound(self.n, self.kappa, horizon)


def completeness_check(mdp: WeightedMdp, nu1, nu2) -> CompletenessReport:
    """Which convergence guarantee applies: positive w2 cycles (bounded gap
    between the sequences), positive w1 cycles (lower sequence constant
    from N0 on), or neither."""
    n = mdp.n_states - 1
    if cycle_report(mdp, W2).all_positive:
        kappa = compute_kappa(mdp, nu2)
        return CompletenessReport(POSITIVE_W2, kappa=kappa, n=n, detail=f"upper - lower <= {n}/(N-{n}) * {kappa}")
    if cycle_report(mdp, W1).all_positive:
        cert = compute_N0(mdp, nu1)
        return CompletenessReport(POSITIVE_W1, n=n, n0=cert.n0, detail=f"lower sequence constant for N >= {cert.n0}")
    return CompletenessReport(NONE_APPLICABLE, n=n, detail="no cycle-sign assumption holds")


@dataclass
class Cartography:
    context: Context
    records: list[CartographyRecord]
    completeness: CompletenessReport
    partial: bool = False
    note: str = ""

    @property
    def bracket(self) -> tuple[Fraction, Fraction]:
        """[lo, hi]: eps < lo has no solution, eps > hi has one."""
        if not self.records:
            return Fraction(0), Fraction(1)
        lo = max(r.lower_certified for r in self.records)
        hi = min(r.upper.witness_p for r in self.records)
        return lo, hi


def solve_level(ctx: Context, N: int, method: str = LP, budget: int = DEFAULT_BUDGET, **kw) -> CartographyRecord:
    tree = hat(unfold(ctx.model, N, budget), ctx.ssp)
    lower = solve(build_problem(tree, ctx.nu1, ctx.nu2, LOWER), method, **kw)
    upper = solve(build_problem(tree, ctx.nu1, ctx.nu2, UPPER), method, **kw)
    return CartographyRecord(N, lower, upper)


def run_cartography(
    mdp: WeightedMdp,
    nu1,
    nu2,
    n_max: int = 8,
    method: str = LP,
    budget: int = DEFAULT_BUDGET,
    **kw,
) -> Cartography:
    """Records for N = 1..n_max (stopping early, flagged partial, when the
    unfolding exceeds the node budget)."""
    from .semantics import BudgetExceeded
    from .optimize import ProblemTooLarge

    ctx = prepare(mdp, nu1, nu2)
    try:
        comp = completeness_check(ctx.model, ctx.nu1, ctx.nu2)
    except AssumptionNotMet:  # pragma: no cover - guarded by cycle_report
        comp = CompletenessReport(NONE_APPLICABLE)
    records = []
    partial = False
    note = ""
    for N in range(1, n_max + 1):
        try:
            rec = solve_level(ctx, N, method, budget, **kw)
        except (BudgetExceeded, ProblemTooLarge) as exc:
            partial, note = True, f"stopped at N={N}: {exc}"
            break
        rec.gap_bound = comp.gap(N)
        rec.stationary = comp.kind == POSITIVE_W1 and N >= comp.n0
        records.append(rec)
    return Cartography(ctx, records, comp, partial, note)


# verdicts ------------------------------------------------------------------------------


@dataclass
class SolutionCheck:
    sure: bool
    probability: Fraction
    expectation: Fraction | float
    epsilon: Fraction
    nu2: Fraction
    reasons: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.reasons


def verify_solution(mdp: WeightedMdp, strategy: Strategy, nu1, nu2, epsilon, budget: int = DEFAULT_BUDGET) -> SolutionCheck:
    """Exact check of the three conditions: every outcome reaches Goal,
    Prob(TS_w1 >= nu1) >= 1 - epsilon, and E(TS_w2) < nu2."""
    nu1, nu2, epsilon = Fraction(nu1), Fraction(nu2), Fraction(epsilon)
    reasons = []
    sure = is_sure(mdp, strategy, budget)
    if not sure:
        reasons.append("reachability")
        return SolutionCheck(False, Fraction(0), math.inf, epsilon, nu2, reasons)
    prob = ts_probability_at_least(mdp, strategy, W1, nu1, budget)
    if prob < 1 - epsilon:
        reasons.append("probability")
    e = expectation_ts(mdp, strategy, W2, budget)
    if not e < nu2:
        reasons.append("expectation")
    return SolutionCheck(sure, prob, e, epsilon, nu2, reasons)


@dataclass
class EpsilonVerdict:
    epsilon: Fraction
    verdict: str
    N: int | None = None
    assembly: Assembly | None = None
    check: SolutionCheck | None = None
    reason: str = ""

    @property
    def strategy(self):
        return None if self.assembly is None else self.assembly.strategy


SWITCH_LIMIT = 5000


def _assemble(ctx: Context, witness: TreeStrategy, q, max_k: int = SWITCH_LIMIT) -> Assembly:
    return assemble_sigma_N_k(ctx.model, witness, q, ctx.nu2, ctx.ssp.policy, ctx.attractor, ctx.bound, max_k)


def classify_epsilon(carto: Cartography, epsilon, max_k: int = SWITCH_LIMIT) -> EpsilonVerdict:
    """Solution when some recorded witness has bad-probability below epsilon
    and its assembled strategy verifies exactly; NoSolution when epsilon is
    below a certified lower value; Unknown otherwise.

    ``max_k`` bounds the switching step searched during assembly.
    """
    eps = Fraction(epsilon)
    ctx = carto.context
    if eps < 0:
        return EpsilonVerdict(eps, NO_SOLUTION, reason="epsilon is negative")
    candidates: list[tuple[int, TreeStrategy, object]] = []
    if eps >= 1:
        tree0 = hat(unfold(ctx.model, 0), ctx.ssp)
        candidates.append((0, TreeStrategy(tree0, {}), ctx.ssp[ctx.model.initial].number))
    for rec in carto.records:
        if rec.upper.bottom:
            # resize the mass sent to the -inf leaf for this epsilon
            problem = build_problem(rec.upper.witness.tree, ctx.nu1, ctx.nu2, UPPER)
            table = bottom_witness(problem, eps)
            if table is not None:
                candidates.append((rec.N, TreeStrategy(problem.tree, table), -math.inf))
        elif rec.upper.witness_p < eps:
            candidates.append((rec.N, rec.upper.witness, rec.upper.witness_q))
    skipped = 0
    for N, witness, q in candidates:
        try:
            asm = _assemble(ctx, witness, q, max_k)
            check = verify_solution(ctx.model, asm.strategy, ctx.nu1, ctx.nu2, eps)
        except (SwitchNotFound, BudgetExceeded):
            skipped += 1
            continue
        if check.ok:
            return EpsilonVerdict(eps, SOLUTION, N, asm, check, reason=f"witness bad-probability below epsilon at N={N}")
    for rec in carto.records:
        if eps < rec.lower_certified:
            return EpsilonVerdict(eps, NO_SOLUTION, rec.N, reason=f"epsilon below the lower value at N={rec.N}")
    lo, hi = carto.bracket
    reason = f"epsilon inside the unresolved bracket [{lo}, {hi}]"
    if skipped:
        reason += f"; {skipped} witness(es) too costly to assemble or verify"
    return EpsilonVerdict(eps, UNKNOWN, reason=reason)


# reports -----------------------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else str(Fraction(x))


def to_csv(carto: Cartography) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "lower", "upper", "alpha", "gap_bound"])
    for r in carto.records:
        w.writerow([r.N, _fmt(r.lower_value), _fmt(r.upper_value), _fmt(r.alpha), _fmt(r.gap_bound)])
    return buf.getvalue()


def to_svg(carto: Cartography, width: int = 480) -> str:
    """Strip chart over epsilon in [0, 1]: red where no solution exists,
    green where one does, white where undecided; one row per N plus the
    aggregate bracket."""
    row_h, left, pad = 18, 70, 8
    rows = [(f"N={r.N}", r.lower_certified, r.upper.witness_p) for r in carto.records]
    lo, hi = carto.bracket
    rows.append(("all N", lo, hi))
    height = pad * 2 + row_h * (len(rows) + 1)
    span = width - left - pad

    def x(v) -> float:
        return left + span * min(max(float(v), 0.0), 1.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for i, (label, a, b) in enumerate(rows):
        y = pad + i * row_h
        parts.append(f'<text x="4" y="{y + 12}">{label}</text>')
        parts.append(f'<rect x="{x(0):.2f}" y="{y + 2}" width="{x(a) - x(0):.2f}" height="{row_h - 4}" fill="#d62728"/>')
        parts.append(f'<rect x="{x(a):.2f}" y="{y + 2}" width="{x(b) - x(a):.2f}" height="{row_h - 4}" fill="white" stroke="#999"/>')
        parts.append(f'<rect x="{x(b):.2f}" y="{y + 2}" width="{x(1) - x(b):.2f}" height="{row_h - 4}" fill="#2ca02c"/>')
    y = pad + len(rows) * row_h
    for t in (0, 0.25, 0.5, 0.75, 1):
        parts.append(f'<text x="{x(t):.2f}" y="{y + 12}" text-anchor="middle">{t:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


__all__ = [
    "Cartography",
    "CartographyRecord",
    "CompletenessReport",
    "Context",
    "EpsilonVerdict",
    "GlobalInfeasible",
    "NONE_APPLICABLE",
    "NO_SOLUTION",
    "POSITIVE_W1",
    "POSITIVE_W2",
    "SOLUTION",
    "SolutionCheck",
    "UNKNOWN",
    "classify_epsilon",
    "completeness_check",
    "prepare",
    "run_cartography",
    "solve_level",
    "to_csv",
    "to_svg",
    "verify_solution",
]
