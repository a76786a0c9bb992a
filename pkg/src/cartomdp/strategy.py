"""Finite-memory strategies.

Every strategy here is a small automaton: a memory value updated after each
transition, and a choice function from (memory, state) to a distribution
over edge labels. A history-based view is derived by folding the update.
Choosing by label (unique per state) keeps a strategy valid on sub-models
that drop edges.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Hashable, Mapping, Sequence

from .model import WeightedMdp

if TYPE_CHECKING:
    from .unfold import UnfoldedTree

Dist = Mapping[str, Fraction]
TAIL = "tail"


class StrategyError(ValueError):
    pass


class Strategy(abc.ABC):
    def initial_memory(self, state: int) -> Hashable:
        return None

    def update(self, memory: Hashable, state: int, nxt: int) -> Hashable:
        return memory

    @abc.abstractmethod
    def choose(self, memory: Hashable, state: int) -> Dist:
        """Distribution over edge labels enabled at ``state``."""

    def memory_after(self, history: Sequence[int]) -> Hashable:
        mem = self.initial_memory(history[0])
        for a, b in zip(history, history[1:]):
            mem = self.update(mem, a, b)
        return mem

    def __call__(self, history: Sequence[int]) -> Dist:
        return self.choose(self.memory_after(history), history[-1])

    def tail_policy(self, memory: Hashable) -> "MemorylessStrategy | None":
        """The memoryless strategy played forever from ``memory`` on, if any."""
        return None


def _dirac(label: str) -> dict[str, Fraction]:
    return {label: Fraction(1)}


@dataclass
class MemorylessStrategy(Strategy):
    """state -> distribution over labels. States missing from the table fall
    back to ``default`` (Goal always plays its loop)."""

    table: dict[int, dict[str, Fraction]]
    goal: int | None = None
    goal_label: str | None = None

    @classmethod
    def pure(cls, mdp: WeightedMdp, choices: Mapping[int, str]) -> "MemorylessStrategy":
        return cls({s: _dirac(lab) for s, lab in choices.items()}, mdp.goal, mdp.goal_loop_label())

    def choose(self, memory, state):
        if state == self.goal and state not in self.table:
            return _dirac(self.goal_label)
        try:
            return self.table[state]
        except KeyError:
            raise StrategyError(f"memoryless strategy undefined at state {state}") from None

    def tail_policy(self, memory):
        return self

    def labels(self) -> dict[int, str]:
        """Pure choices; raises if the strategy randomises."""
        out = {}
        for s, d in self.table.items():
            support = [lab for lab, p in d.items() if p > 0]
            if len(support) != 1:
                raise StrategyError("strategy is randomised")
            out[s] = support[0]
        return out


@dataclass
class HistoryStrategy(Strategy):
    """Wraps a plain function of the history (memory = the history itself).

    Only usable for horizon-bounded evaluation: memory grows with time.
    """

    fn: object

    def initial_memory(self, state):
        return (state,)

    def update(self, memory, state, nxt):
        return memory + (nxt,)

    def choose(self, memory, state):
        return self.fn(memory)


@dataclass
class TreeStrategy(Strategy):
    """A distribution per decision node of an unfolded tree (memory = node id)."""

    tree: "UnfoldedTree"
    table: dict[int, dict[str, Fraction]]

    def initial_memory(self, state):
        return self.tree.root

    def update(self, memory, state, nxt):
        child = self.tree.child(memory, nxt)
        if child is None:
            raise StrategyError("history leaves the unfolded tree")
        return child

    def choose(self, memory, state):
        node = self.tree.nodes[memory]
        if node.state == self.tree.goal:
            return _dirac(self.tree.goal_label)
        try:
            return self.table[memory]
        except KeyError:
            raise StrategyError(f"tree strategy undefined at node {memory} (depth {node.depth})") from None

    def export(self, mdp: WeightedMdp) -> dict[str, dict[str, str]]:
        out = {}
        for nid in sorted(self.table):
            key = " ".join(mdp.states[s] for s in self.tree.history(nid))
            out[key] = {lab: str(p) for lab, p in sorted(self.table[nid].items())}
        return out


@dataclass
class CompositeStrategy(Strategy):
    """Tree strategy for the tree's depth, then ``middle`` until step ``k``,
    then ``tail`` forever.

    With ``middle`` omitted and ``k`` equal to the tree depth this is the
    plain "tree then memoryless" shape; with a middle phase it plays a
    strategy sigma_N (tree + continuation) for k steps and then switches to
    an attractor.
    """

    tree_strategy: TreeStrategy
    k: int
    tail: MemorylessStrategy
    middle: MemorylessStrategy | None = None
    depth: int = field(init=False)

    def __post_init__(self):
        self.depth = self.tree_strategy.tree.depth
        if self.k < self.depth:
            raise StrategyError(f"k={self.k} is smaller than the tree depth {self.depth}")
        if self.k > self.depth and self.middle is None:
            raise StrategyError("a middle phase is needed when k exceeds the tree depth")

    def _after_tree(self, t: int):
        return TAIL if t >= self.k else ("mid", t)

    def initial_memory(self, state):
        root = self.tree_strategy.tree.root
        if self.depth == 0:
            return self._after_tree(0)
        return ("tree", root)

    def update(self, memory, state, nxt):
        if memory == TAIL:
            return TAIL
        kind, val = memory
        if kind == "tree":
            child = self.tree_strategy.update(val, state, nxt)
            d = self.tree_strategy.tree.nodes[child].depth
            return ("tree", child) if d < self.depth else self._after_tree(d)
        return self._after_tree(val + 1)

    def choose(self, memory, state):
        if memory == TAIL:
            return self.tail.choose(None, state)
        kind, val = memory
        if kind == "tree":
            return self.tree_strategy.choose(val, state)
        return self.middle.choose(None, state)

    def tail_policy(self, memory):
        return self.tail if memory == TAIL else None

    def export(self, mdp: WeightedMdp) -> dict:
        def table(pol):
            return {
                mdp.states[s]: {lab: str(p) for lab, p in sorted(d.items())}
                for s, d in sorted(pol.table.items())
            }

        doc = {
            "kind": "composite",
            "k": self.k,
            "tree_depth": self.depth,
            "tree": self.tree_strategy.export(mdp),
            "tail": table(self.tail),
        }
        if self.middle is not None:
            doc["middle"] = table(self.middle)
        return doc


@dataclass
class SwitchingStrategy(Strategy):
    """``first`` for the first ``k`` steps, then ``tail`` forever (memory = step count)."""

    first: Strategy
    k: int
    tail: MemorylessStrategy

    def initial_memory(self, state):
        return TAIL if self.k == 0 else (0, self.first.initial_memory(state))

    def update(self, memory, state, nxt):
        if memory == TAIL:
            return TAIL
        t, inner = memory
        if t + 1 >= self.k:
            return TAIL
        return (t + 1, self.first.update(inner, state, nxt))

    def choose(self, memory, state):
        if memory == TAIL:
            return self.tail.choose(None, state)
        return self.first.choose(memory[1], state)

    def tail_policy(self, memory):
        return self.tail if memory == TAIL else None
