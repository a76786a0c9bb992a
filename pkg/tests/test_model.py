import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomdp.catalog import CATALOG, branching_mdp, retry_mdp
from cartomdp.model import (
    PHI_MINUS,
    PHI_PLUS,
    PSI,
    W1,
    W2,
    MdpError,
    MdpFormatError,
    WeightedMdp,
    accumulated_weight,
    classify_prefix,
    parse_mdp,
    serialize_mdp,
    to_fraction,
    truncated_sum,
    validate,
)
from cartomdp.random_models import random_mdp
import random


def test_to_fraction_accepts_exact_forms():
    assert to_fraction("1/3") == Fraction(1, 3)
    assert to_fraction("2.1") == Fraction(21, 10)
    assert to_fraction(4) == 4


def test_to_fraction_refuses_floats():
    with pytest.raises(TypeError):
        to_fraction(0.5)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_models_round_trip(name):
    mdp = CATALOG[name]()
    assert validate(mdp) == []
    again = parse_mdp(serialize_mdp(mdp))
    assert serialize_mdp(again) == serialize_mdp(mdp)
    assert again.query == mdp.query


@given(st.integers(0, 10_000), st.integers(2, 6))
@settings(max_examples=40, deadline=None)
def test_random_models_round_trip(seed, n):
    mdp = random_mdp(random.Random(seed), n_states=n)
    text = serialize_mdp(mdp)
    assert serialize_mdp(parse_mdp(text)) == text


def test_syntax_error_reports_position():
    with pytest.raises(MdpFormatError) as info:
        parse_mdp('{"states": [\n  "a",\n  ]')
    assert info.value.line is not None


def test_unknown_target_is_rejected():
    doc = json.loads(serialize_mdp(retry_mdp()))
    doc["edges"][0]["distribution"]["nowhere"] = "0"
    with pytest.raises(MdpFormatError, match="nowhere"):
        parse_mdp(json.dumps(doc))


def test_distribution_must_sum_to_one():
    doc = json.loads(serialize_mdp(retry_mdp()))
    doc["edges"][2]["distribution"] = {"Goal": "1/2"}
    with pytest.raises(MdpError):
        parse_mdp(json.dumps(doc))


def test_goal_without_loop_is_rejected():
    doc = json.loads(serialize_mdp(retry_mdp()))
    doc["edges"] = [e for e in doc["edges"] if e["source"] != "Goal"]
    with pytest.raises(MdpError):
        parse_mdp(json.dumps(doc))


def test_pair_weights_must_agree():
    mdp = WeightedMdp.build(
        ["s", "Goal"],
        "s",
        "Goal",
        [("s", "a", {"Goal": 1}, (1, 0)), ("s", "b", {"Goal": 1}, (2, 0))],
    )
    assert validate(mdp)
    with pytest.raises(MdpError):
        parse_mdp(serialize_mdp(mdp))


def test_path_sums_on_branching_model():
    m = branching_mdp()
    s0, s1, s2, goal = (m.index[x] for x in ("s0", "s1", "s2", "Goal"))
    path = [s0, s1, s1, goal, goal]
    assert accumulated_weight(m, path, W2, 3) == -2
    assert truncated_sum(m, path, W2) == -2
    assert truncated_sum(m, [s0, goal], W1) == 1
    with pytest.raises(ValueError):
        truncated_sum(m, [s0, s1], W2)
    assert classify_prefix(m, [s0, goal], 1, Fraction(1)) == PHI_PLUS
    assert classify_prefix(m, path, 3, Fraction(1)) == PHI_MINUS
    assert classify_prefix(m, path, 2, Fraction(1)) == PSI
