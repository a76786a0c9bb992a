import random
import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomdp.analysis import ssp_solve
from cartomdp.cartography import (
    NO_SOLUTION,
    NONE_APPLICABLE,
    POSITIVE_W1,
    POSITIVE_W2,
    SOLUTION,
    UNKNOWN,
    GlobalInfeasible,
    classify_epsilon,
    completeness_check,
    run_cartography,
    to_csv,
    to_svg,
    verify_solution,
)
from cartomdp.catalog import branching_mdp, draining_loop_mdp, idle_loop_mdp, retry_mdp
from cartomdp.optimize import BRUTE
from cartomdp.random_models import random_mdp


@pytest.fixture(scope="module")
def retry_carto():
    return run_cartography(retry_mdp(), 1, Fraction(21, 10), n_max=5)


def test_retry_records(retry_carto):
    for rec in retry_carto.records:
        assert rec.lower_value == 0
        assert rec.upper.witness_p == Fraction(1, 2**rec.N)
    assert retry_carto.completeness.kind == POSITIVE_W2
    assert retry_carto.bracket == (0, Fraction(1, 32))


def test_retry_verdicts(retry_carto):
    v = classify_epsilon(retry_carto, Fraction(3, 10))
    assert v.verdict == SOLUTION and v.N == 2 and v.check.ok
    assert v.check.probability == Fraction(3, 4)
    assert classify_epsilon(retry_carto, 0).verdict == UNKNOWN
    assert classify_epsilon(retry_carto, -1).verdict == NO_SOLUTION
    big = classify_epsilon(retry_carto, 1)
    assert big.verdict == SOLUTION and big.N == 0


def test_positive_lower_bound_gives_no_solution():
    carto = run_cartography(branching_mdp(), 1, Fraction(43, 10), n_max=2)
    lo, hi = carto.bracket
    assert lo > 0
    assert classify_epsilon(carto, lo / 2).verdict == NO_SOLUTION
    assert classify_epsilon(carto, Fraction(1, 2)).verdict == SOLUTION


def test_global_infeasibility():
    with pytest.raises(GlobalInfeasible):
        run_cartography(retry_mdp(), 1, 1)


@pytest.mark.parametrize("factory", [idle_loop_mdp, draining_loop_mdp])
def test_loop_models_have_full_gap(factory):
    m = factory()
    carto = run_cartography(m, m.query["nu1"], m.query["nu2"], n_max=4)
    assert carto.completeness.kind == NONE_APPLICABLE
    for rec in carto.records[1:]:
        assert rec.lower_value == 0 and rec.upper.witness_p == 1


def test_completeness_kinds():
    assert completeness_check(retry_mdp(), 1, 3).kind == POSITIVE_W2
    from cartomdp.model import WeightedMdp

    # w2 loop has weight 0 (no gap law), w1 loop weight 1
    m = WeightedMdp.build(
        ["s", "Goal"], "s", "Goal", [("s", "a", {"s": 1}, (1, 0)), ("s", "b", {"Goal": 1}, (0, 0))]
    )
    rep = completeness_check(m, 2, 1)
    assert rep.kind == POSITIVE_W1 and rep.n0 == 3


def test_reports(retry_carto):
    csv = to_csv(retry_carto).splitlines()
    assert csv[0] == "N,lower,upper,alpha,gap_bound"
    assert csv[1].startswith("1,0,1/2,")
    root = ET.fromstring(to_svg(retry_carto))
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}rect")) == 1 + 3 * (len(retry_carto.records) + 1)


def test_reports_are_deterministic():
    a = run_cartography(branching_mdp(), 1, Fraction(43, 10), n_max=3, method=BRUTE)
    b = run_cartography(branching_mdp(), 1, Fraction(43, 10), n_max=3, method=BRUTE)
    assert to_csv(a) == to_csv(b) and to_svg(a) == to_svg(b)


def test_budget_stops_early():
    carto = run_cartography(retry_mdp(), 1, Fraction(21, 10), n_max=30, budget=40)
    assert carto.partial and carto.records


def test_verify_solution_reasons():
    m = retry_mdp()
    from cartomdp.strategy import MemorylessStrategy

    give_up = MemorylessStrategy.pure(m, {m.index["s0"]: "b", m.index["s1"]: "c"})
    check = verify_solution(m, give_up, 1, Fraction(21, 10), Fraction(1, 2))
    assert check.reasons == ["probability"]
    retry = MemorylessStrategy.pure(m, {m.index["s0"]: "a", m.index["s1"]: "c"})
    assert verify_solution(m, retry, 1, 3, 0).reasons == ["reachability"]


@given(st.integers(0, 10**6), st.integers(2, 4))
@settings(max_examples=25, deadline=None)
def test_bracket_is_ordered_and_verdicts_sound(seed, n):
    rng = random.Random(seed)
    m = random_mdp(rng, n_states=n)
    v = ssp_solve(m)[m.initial]
    nu2 = (v.value if v.tag == "finite" else Fraction(-10)) + Fraction(rng.randint(1, 4), 2)
    carto = run_cartography(m, rng.randint(0, 2), nu2, n_max=3)
    lo, hi = carto.bracket
    assert lo <= hi
    for eps in (Fraction(0), lo, (lo + hi) / 2, min(hi + Fraction(1, 4), Fraction(1))):
        verdict = classify_epsilon(carto, eps)
        if verdict.verdict == SOLUTION:
            assert verdict.check.ok
