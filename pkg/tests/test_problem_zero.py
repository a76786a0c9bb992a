import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomdp.analysis import AssumptionNotMet, cycle_report
from cartomdp.catalog import draining_loop_mdp, one_step_mdp, retry_mdp
from cartomdp.evgen import EvScenario, generate
from cartomdp.model import W1, WeightedMdp, validate
from cartomdp.problem_zero import (
    NON_NEGATIVE,
    NON_POSITIVE,
    build_product,
    choose_mode,
    decide_p0,
    p0_oracle,
    verify_p0_witness,
)
from cartomdp.random_models import random_mdp
from cartomdp.semantics import BudgetExceeded


def test_retry_is_no():
    res = decide_p0(retry_mdp(), 1, Fraction(21, 10))
    assert res.verdict == "No"
    assert res.value.tag == "+inf"
    assert res.product.size == 4 and res.product.M == 4
    assert res.strategy is None


def test_one_step_is_yes_with_verified_witness():
    m = one_step_mdp(1, 0)
    res = decide_p0(m, 1, 1)
    assert res.verdict == "Yes" and res.value.value == 0
    assert verify_p0_witness(m, res.strategy, 1, 1).ok
    assert decide_p0(m, 2, 1).verdict == "No"
    assert decide_p0(m, 1, 0).verdict == "No"


def test_non_positive_mode():
    m = draining_loop_mdp()
    assert choose_mode(m) == NON_POSITIVE
    res = decide_p0(m, 1, 1)
    assert res.verdict == "Yes"
    assert verify_p0_witness(m, res.strategy, 1, 1).ok
    assert decide_p0(m, 2, 1).verdict == "No"


def test_mixed_sign_cycles_are_refused():
    m = WeightedMdp.build(
        ["a", "b", "Goal"],
        "a",
        "Goal",
        [
            ("a", "x", {"b": 1}, (1, 0)),
            ("b", "y", {"a": 1}, (1, 0)),
            ("a", "z", {"a": 1}, (-1, 0)),
            ("a", "g", {"Goal": 1}, (0, 0)),
        ],
    )
    with pytest.raises(AssumptionNotMet):
        decide_p0(m, 0, 1)
    with pytest.raises(AssumptionNotMet):
        build_product(m, 0, mode=NON_NEGATIVE)


def test_rational_weights_are_scaled():
    m = one_step_mdp(Fraction(1, 3), 0)
    prod = build_product(m, Fraction(1, 2))
    assert prod.scale == 6
    assert decide_p0(m, Fraction(1, 2), 1).verdict == "No"
    assert decide_p0(m, Fraction(1, 3), 1).verdict == "Yes"


def test_product_budget():
    with pytest.raises(BudgetExceeded):
        build_product(generate(EvScenario.random(6, 3, seed=1)), 4, budget=10)


def test_minus_infinity_witness():
    # a free pump: the w2 loop can be repeated at will before exiting
    m = WeightedMdp.build(
        ["s", "Goal"], "s", "Goal", [("s", "a", {"s": 1}, (1, -1)), ("s", "b", {"Goal": 1}, (0, 0))]
    )
    res = decide_p0(m, 2, -5)
    assert res.verdict == "Yes" and res.value.tag == "-inf"
    check = verify_p0_witness(m, res.strategy, 2, -5)
    assert check.ok and check.expectation < -5


def test_ev_scenario():
    sc = EvScenario.random(4, 3, seed=7)
    m = generate(sc)
    assert validate(m) == []
    assert cycle_report(m, W1).all_positive  # only Goal loops
    res = decide_p0(m, sc.target, 5)
    assert res.verdict == "Yes" and res.value.value == Fraction(21, 10)
    assert verify_p0_witness(m, res.strategy, sc.target, 5).ok
    assert generate(EvScenario.random(4, 3, seed=7)) == m


@given(st.integers(0, 10**6), st.integers(2, 6))
@settings(max_examples=80, deadline=None)
def test_agrees_with_oracle(seed, n):
    rng = random.Random(seed)
    m = random_mdp(rng, n_states=n, acyclic=True, goal_edge=rng.random() < 0.5)
    nu1 = Fraction(rng.randint(-2, 3))
    nu2 = Fraction(rng.randint(-6, 6), 2)
    res = decide_p0(m, nu1, nu2)
    expected, _ = p0_oracle(m, nu1, nu2)
    assert res.answer == expected
    if res.answer:
        assert verify_p0_witness(m, res.strategy, nu1, nu2).ok
