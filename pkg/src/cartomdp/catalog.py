"""Small hand-made models used in examples, tests and documentation."""
from __future__ import annotations

from fractions import Fraction

from .model import WeightedMdp

HALF = Fraction(1, 2)


def branching_mdp() -> WeightedMdp:
    """Direct route ``a`` to Goal, or a detour through a coin-flip loop.

    At ``s1`` the loop ``c`` costs -1 on w2 and exits to Goal with
    probability 1/2; ``d`` moves on to ``s2`` at w2-cost 14.
    """
    return WeightedMdp.build(
        ["s0", "s1", "s2", "Goal"],
        "s0",
        "Goal",
        [
            ("s0", "a", {"Goal": 1}, (1, 5)),
            ("s0", "b", {"s1": 1}, (0, 0)),
            ("s1", "c", {"Goal": HALF, "s1": HALF}, (0, -1)),
            ("s1", "d", {"s2": 1}, (0, 14)),
            ("s2", "e", {"Goal": 1}, (0, 0)),
        ],
    )


def retry_mdp() -> WeightedMdp:
    """Retry ``a`` (good exit w.p. 1/2, else back to ``s0``) or give up via ``b``.

    With nu1 = 1 and nu2 = 2.1 the lower sequence is 0, the upper one
    1/2^N, and no strategy solves the zero-threshold problem.
    """
    return WeightedMdp.build(
        ["s0", "s1", "Goal"],
        "s0",
        "Goal",
        [
            ("s0", "a", {"Goal": HALF, "s0": HALF}, {"Goal": (1, 1), "s0": (0, 1)}),
            ("s0", "b", {"s1": 1}, (-1, 1)),
            ("s1", "c", {"Goal": 1}, (0, 0)),
        ],
        query={"nu1": 1, "nu2": "21/10"},
    )


def idle_loop_mdp() -> WeightedMdp:
    """Free idle loop ``a``; ``b`` ends with w1 = -1. All w2 are zero."""
    return WeightedMdp.build(
        ["s", "Goal"],
        "s",
        "Goal",
        [("s", "a", {"s": 1}, (0, 0)), ("s", "b", {"Goal": 1}, (-1, 0))],
        query={"nu1": 0, "nu2": 1},
    )


def draining_loop_mdp() -> WeightedMdp:
    """Loop ``a`` drains w1 by one per turn; ``b`` ends with w1 = +1."""
    return WeightedMdp.build(
        ["s", "Goal"],
        "s",
        "Goal",
        [("s", "a", {"s": 1}, (-1, 0)), ("s", "b", {"Goal": 1}, (1, 0))],
        query={"nu1": 2, "nu2": 1},
    )


def one_step_mdp(w1=1, w2=0) -> WeightedMdp:
    return WeightedMdp.build(["s", "Goal"], "s", "Goal", [("s", "go", {"Goal": 1}, (w1, w2))])


CATALOG = {
    "branching": branching_mdp,
    "retry": retry_mdp,
    "idle_loop": idle_loop_mdp,
    "draining_loop": draining_loop_mdp,
    "one_step": one_step_mdp,
}
