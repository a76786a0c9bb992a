"""Acceptance suite: one PASS/FAIL line per criterion.

The lines are collected in ``REPORT`` and printed again in the terminal
summary (see conftest.py), so they appear in plain ``pytest -v`` output.
"""
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from cartomdp.analysis import NoAttractor, compute_N0, ssp_solve, sure_region
from cartomdp.cartography import (
    SOLUTION,
    GlobalInfeasible,
    classify_epsilon,
    completeness_check,
    run_cartography,
    verify_solution,
)
from cartomdp.catalog import branching_mdp, draining_loop_mdp, idle_loop_mdp, retry_mdp
from cartomdp.evgen import EvScenario, generate
from cartomdp.model import PHI_PLUS, W1, W2
from cartomdp.optimize import BRUTE, LOWER, LP, UPPER, build_problem, solve, solve_brute
from cartomdp.problem_zero import decide_p0, p0_oracle, verify_p0_witness
from cartomdp.random_models import random_mdp
from cartomdp.semantics import EventSpec, expectation_ts, monte_carlo, reach_probability, ts_probability_at_least
from cartomdp.strategy import MemorylessStrategy
from cartomdp.unfold import hat, unfold

REPORT: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def brute_pair(model, ssp, N, nu1, nu2, **kw):
    tree = hat(unfold(model, N), ssp)
    low = solve_brute(build_problem(tree, nu1, nu2, LOWER), **kw)
    up = solve_brute(build_problem(tree, nu1, nu2, UPPER), **kw)
    return low, up


def feasible_query(rng, model):
    """(nu1, nu2) with nu2 strictly above the least expected w2 from the start."""
    v = ssp_solve(model)[model.initial]
    base = v.value if v.tag == "finite" else Fraction(-4)
    return Fraction(rng.randint(-1, 2)), base + Fraction(rng.randint(1, 8), 4)


# 1 -------------------------------------------------------------------------------------


def test_criterion_01_mixed_strategy_values():
    t0 = time.perf_counter()
    m = branching_mdp()
    ix = m.index
    half = Fraction(1, 2)
    sigma = MemorylessStrategy(
        {ix["s0"]: {"a": half, "b": half}, ix["s1"]: {"c": Fraction(1)}, ix["s2"]: {"e": Fraction(1)}},
        m.goal,
        m.goal_loop_label(),
    )
    reach = reach_probability(m, sigma)
    prob = ts_probability_at_least(m, sigma, W1, Fraction(1))
    exp = expectation_ts(m, sigma, W2)
    dt = time.perf_counter() - t0
    ok = reach == 1 and prob == half and exp == Fraction(3, 2) and dt < 1
    report(1, ok, f"Prob(F Goal)={reach}, Prob(TS_w1>=1)={prob}, E(TS_w2)={exp}, {dt:.3f}s")


# 2 -------------------------------------------------------------------------------------


def test_criterion_02_retry_sequences_and_p0():
    t0 = time.perf_counter()
    m = retry_mdp()
    nu1, nu2 = Fraction(1), Fraction(21, 10)
    ssp = ssp_solve(m)
    bad = []
    for N in range(1, 9):
        low, up = brute_pair(m, ssp, N, nu1, nu2, cap=None)
        if low.value != 0 or up.value != Fraction(1, 2**N):
            bad.append((N, low.value, up.value))
    p0 = decide_p0(m, nu1, nu2)
    dt = time.perf_counter() - t0
    ok = not bad and p0.verdict == "No" and dt < 30
    report(2, ok, f"v_N=0 and upper=1/2^N for N=1..8 (mismatches {bad}), P(0)={p0.verdict}, {dt:.2f}s")


# 3, 4 ----------------------------------------------------------------------------------


def _loop_model(factory, n_range, number):
    m = factory()
    nu1, nu2 = m.query["nu1"], m.query["nu2"]
    model = sure_region(m)
    ssp = ssp_solve(model)
    seen = []
    for N in n_range:
        low, up = brute_pair(model, ssp, N, nu1, nu2, cap=None)
        seen.append((N, low.value, up.value))
    ok = all(lo == 0 and hi == 1 for _, lo, hi in seen)
    report(number, ok, f"nu1={nu1}: (N, v_N, upper_N) = {[(N, str(a), str(b)) for N, a, b in seen]}")


def test_criterion_03_idle_loop():
    _loop_model(idle_loop_mdp, range(1, 7), 3)


def test_criterion_04_draining_loop():
    _loop_model(draining_loop_mdp, range(2, 7), 4)


# 5 -------------------------------------------------------------------------------------


def test_criterion_05_monotonicity():
    # Only models where the expectation constraint binds at some level are
    # counted; elsewhere the brute force returns the pure minimiser of P.
    rng = random.Random(5)
    count = skipped = 0
    worst = Fraction(0)
    failures = []
    seed = 0
    t0 = time.perf_counter()
    while count < 100:
        seed += 1
        m = random_mdp(random.Random(seed), n_states=rng.randint(3, 5), max_actions=2, goal_edge=seed % 2 == 0)
        try:
            model = sure_region(m)
        except NoAttractor:
            continue
        v = ssp_solve(model)[model.initial]
        if v.tag != "finite":
            continue
        nu1, nu2 = Fraction(rng.randint(0, 2)), v.value + Fraction(rng.randint(1, 4), 4)
        ssp = ssp_solve(model)
        rows = [(N, *brute_pair(model, ssp, N, nu1, nu2, cap=None, grid=8)) for N in range(1, 5)]
        if not any(r.alpha > 0 and not r.bottom for _, lo, up in rows for r in (lo, up)):
            skipped += 1
            continue
        count += 1
        for (N, lo, up), (_, lo2, up2) in zip(rows, rows[1:]):
            tol = 2 * max(lo.alpha, up.alpha, lo2.alpha, up2.alpha)
            worst = max(worst, up2.value - up.value, lo.value - lo2.value)
            if up2.value > up.value + tol or lo2.value < lo.value - tol:
                failures.append((seed, N))
        for N, lo, up in rows:
            if lo.value > up.value:
                failures.append((seed, N, "order"))
    dt = time.perf_counter() - t0
    report(
        5,
        not failures,
        f"{count} models with a binding constraint ({skipped} trivial skipped), N=1..4, "
        f"largest raw violation {worst}, failures {failures[:5]}, {dt:.1f}s",
    )


# 6 -------------------------------------------------------------------------------------


def test_criterion_06_gap_law():
    rng = random.Random(6)
    count = 0
    failures = []
    slack = math.inf
    levels = positive = 0
    seed = 0
    while count < 50:
        seed += 1
        m = random_mdp(random.Random(1000 + seed), n_states=rng.randint(2, 4), w2_range=(1, 3))
        model = sure_region(m)
        nu1, nu2 = feasible_query(rng, model)
        n = model.n_states - 1
        try:
            carto = run_cartography(model, nu1, nu2, n_max=n + 3)
        except GlobalInfeasible:
            continue
        if carto.completeness.kind != "positive-w2" or carto.partial:
            continue
        count += 1
        for rec in carto.records:
            if rec.N <= n:
                continue
            gap = rec.upper.value - rec.lower.value
            levels += 1
            positive += gap > 0
            allowed = rec.gap_bound + 2 * max(rec.alpha, Fraction(1, 10**6))
            slack = min(slack, allowed - gap)
            if gap > allowed:
                failures.append((seed, rec.N, gap, allowed))
    report(
        6,
        not failures,
        f"{count} models, {levels} levels N > n ({positive} with a positive gap), "
        f"least slack {float(slack):.4g}, failures {failures[:3]}",
    )


# 7 -------------------------------------------------------------------------------------


def test_criterion_07_stationarity():
    rng = random.Random(7)
    count = 0
    failures = []
    seed = 0
    n0s = []
    while count < 50:
        seed += 1
        m = random_mdp(random.Random(2000 + seed), n_states=rng.randint(2, 4), w1_range=(1, 2), w2_range=(-1, 2))
        try:
            model = sure_region(m)
        except NoAttractor:
            continue
        v = ssp_solve(model)[model.initial]
        if v.tag != "finite":
            continue
        nu2 = v.value + Fraction(rng.randint(1, 6), 4)
        nu1 = Fraction(rng.randint(0, 5))
        n0 = compute_N0(model, nu1).n0
        if n0 > 6:
            continue
        try:
            carto = run_cartography(model, nu1, nu2, n_max=max(n0, 1) + 2)
        except GlobalInfeasible:
            continue
        if carto.partial:
            continue
        count += 1
        n0s.append(n0)
        tail = [rec for rec in carto.records if rec.N >= n0]
        ref = tail[0].lower.value
        for rec in tail[1:]:
            tol = max(rec.alpha, tail[0].alpha, Fraction(1, 10**6))
            if abs(rec.lower.value - ref) > tol:
                failures.append((seed, rec.N, rec.lower.value, ref))
    report(7, not failures, f"{count} models, N0 in [{min(n0s)}, {max(n0s)}], failures {failures[:3]}")


# 8 -------------------------------------------------------------------------------------


def test_criterion_08_p0_oracle():
    t0 = time.perf_counter()
    rng = random.Random(8)
    count = yes = 0
    disagreements = []
    for seed in range(300):
        r = random.Random(3000 + seed)
        m = random_mdp(r, n_states=r.randint(2, 6), acyclic=True, goal_edge=r.random() < 0.5)
        nu1 = Fraction(rng.randint(-2, 3))
        nu2 = Fraction(rng.randint(-6, 6), 2)
        res = decide_p0(m, nu1, nu2)
        expected, _ = p0_oracle(m, nu1, nu2, grid=8)
        count += 1
        yes += res.answer
        if res.answer != expected:
            disagreements.append(seed)
        elif res.answer and not verify_p0_witness(m, res.strategy, nu1, nu2).ok:
            disagreements.append((seed, "witness"))
    dt = time.perf_counter() - t0
    ok = not disagreements and dt < 300
    report(8, ok, f"{count} instances ({yes} Yes), disagreements {disagreements[:5]}, {dt:.1f}s")


# 9 -------------------------------------------------------------------------------------


def _corpus():
    yield branching_mdp(), Fraction(1), Fraction(43, 10)
    yield retry_mdp(), Fraction(1), Fraction(21, 10)
    yield idle_loop_mdp(), Fraction(0), Fraction(1)
    yield draining_loop_mdp(), Fraction(2), Fraction(1)
    rng = random.Random(9)
    for seed in range(40):
        m = random_mdp(random.Random(4000 + seed), n_states=rng.randint(2, 4))
        try:
            model = sure_region(m)
        except NoAttractor:
            continue
        nu1, nu2 = feasible_query(rng, model)
        yield m, nu1, nu2


def test_criterion_09_verdict_soundness():
    solutions = checked = 0
    failures = []
    for m, nu1, nu2 in _corpus():
        try:
            carto = run_cartography(m, nu1, nu2, n_max=3)
        except GlobalInfeasible:
            continue
        lo, hi = carto.bracket
        for eps in (Fraction(0), lo, (lo + hi) / 2, min(hi + Fraction(1, 4), Fraction(1)), Fraction(1)):
            verdict = classify_epsilon(carto, eps)
            if verdict.verdict != SOLUTION:
                continue
            solutions += 1
            # re-check on the original model, independently of the verdict's own check
            check = verify_solution(m, verdict.strategy, nu1, nu2, eps)
            checked += 1
            if not check.ok:
                failures.append((m.states, eps, check.reasons))
    ok = solutions > 0 and not failures
    report(9, ok, f"{solutions} Solution verdicts, {checked - len(failures)}/{checked} pass the exact checks")


# 10 ------------------------------------------------------------------------------------


def test_criterion_10_numerical_hygiene():
    rng = random.Random(10)
    problems = 0
    worst = 0.0
    seed = 0
    while problems < 100:
        seed += 1
        r = random.Random(5000 + seed)
        m = random_mdp(r, n_states=r.randint(2, 5), max_actions=3)
        model = sure_region(m)
        ssp = ssp_solve(model)
        tree = hat(unfold(model, r.randint(1, 4)), ssp)
        problem = build_problem(tree, r.randint(0, 2), 100, r.choice([UPPER, LOWER]))
        if problem.n_vars == 0:
            continue
        problems += 1
        x = np.array([r.random() for _ in range(problem.n_vars)])
        _, _, gp, gq = problem.value_and_grad(x)
        h = 1e-6
        for j in range(problem.n_vars):
            e = np.zeros_like(x)
            e[j] = h
            pp, qp, _, _ = problem.value_and_grad(x + e)
            pm, qm, _, _ = problem.value_and_grad(x - e)
            for g, fd in ((gp[j], (pp - pm) / (2 * h)), (gq[j], (qp - qm) / (2 * h))):
                worst = max(worst, abs(g - fd) / max(1.0, abs(g)))
    grad_ok = worst <= 1e-6

    # Monte-Carlo estimates at 99% confidence against exact values
    cases = []
    m = branching_mdp()
    ix = m.index
    half = Fraction(1, 2)
    mixed = MemorylessStrategy(
        {ix["s0"]: {"a": half, "b": half}, ix["s1"]: {"c": Fraction(1)}, ix["s2"]: {"e": Fraction(1)}},
        m.goal,
        m.goal_loop_label(),
    )
    cases.append((m, mixed, Fraction(1)))
    r = retry_mdp()
    carto = run_cartography(r, 1, Fraction(21, 10), n_max=3)
    cases.append((r, classify_epsilon(carto, Fraction(3, 10)).strategy, Fraction(1)))
    sc = EvScenario.random(4, 3, seed=7)
    ev = generate(sc)
    cases.append((ev, decide_p0(ev, sc.target, 5).strategy, Fraction(sc.target)))
    misses = []
    for i, (model, sigma, nu1) in enumerate(cases):
        exact_e = expectation_ts(model, sigma, W2)
        exact_p = ts_probability_at_least(model, sigma, W1, nu1)
        est_e = monte_carlo(model, sigma, W2, 3000, seed=100 + i)
        est_p = monte_carlo(model, sigma, EventSpec(200, PHI_PLUS, nu1), 3000, seed=200 + i)
        if not est_e.contains(exact_e):
            misses.append((i, "E", float(exact_e), est_e.mean))
        if not (est_p.contains(exact_p) or (est_p.half_width == 0 and est_p.mean == float(exact_p))):
            misses.append((i, "P", float(exact_p), est_p.mean))
    ok = grad_ok and not misses
    report(10, ok, f"{problems} problems, worst relative gradient error {worst:.2e}; Monte-Carlo misses {misses}")
