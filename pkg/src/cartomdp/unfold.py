"""Depth-N unfoldings of a model as a tree of state histories.

A node stands for one history from the initial state (at most N steps).
Goal nodes are absorbing; non-Goal nodes at depth N are leaves whose
continuation is summarised, in the *hat* variant, by the w2 shortest-path
value of their state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from .analysis import FINITE, PLUS_INF, SspSolution, SspValue
from .model import W1, W2, WeightedMdp
from .semantics import DEFAULT_BUDGET, BudgetExceeded
from .strategy import CompositeStrategy, MemorylessStrategy, Strategy, StrategyError, TreeStrategy

PLAIN = "plain"
HAT = "hat"
INFEASIBLE = "infeasible"
BOTTOM = "bottom"


@dataclass(frozen=True)
class TreeNode:
    id: int
    state: int
    depth: int
    parent: int | None
    acc: tuple[Fraction, Fraction]
    # edge label -> ((child id, probability), ...); empty for leaves and Goal
    children: Mapping[str, tuple[tuple[int, Fraction], ...]] = field(default_factory=dict)


@dataclass
class UnfoldedTree:
    mdp: WeightedMdp
    depth: int
    nodes: list[TreeNode]
    variant: str = PLAIN
    terminal: dict[int, SspValue] = field(default_factory=dict)
    root: int = 0

    def __post_init__(self):
        self._by_state: list[dict[int, int]] = [dict() for _ in self.nodes]
        for node in self.nodes:
            if node.parent is not None:
                self._by_state[node.parent][node.state] = node.id

    @property
    def goal(self) -> int:
        return self.mdp.goal

    @property
    def goal_label(self) -> str:
        return self.mdp.goal_loop_label()

    def __len__(self) -> int:
        return len(self.nodes)

    def child(self, node: int, state: int) -> int | None:
        if self.nodes[node].state == self.goal and state == self.goal:
            return node
        return self._by_state[node].get(state)

    def history(self, node: int) -> tuple[int, ...]:
        out = []
        cur: int | None = node
        while cur is not None:
            out.append(self.nodes[cur].state)
            cur = self.nodes[cur].parent
        return tuple(reversed(out))

    def is_decision(self, node: int) -> bool:
        return bool(self.nodes[node].children)

    def decision_nodes(self) -> list[int]:
        return [n.id for n in self.nodes if n.children]

    def leaves(self) -> list[int]:
        return [n.id for n in self.nodes if not n.children]

    def mark(self, node: int) -> str | None:
        """INFEASIBLE / BOTTOM for depth-N leaves with an infinite terminal value."""
        v = self.terminal.get(node)
        if v is None or v.tag == FINITE:
            return None
        return INFEASIBLE if v.tag == PLUS_INF else BOTTOM

    def terminal_weight(self, node: int) -> Fraction:
        v = self.terminal.get(node)
        return v.value if v is not None and v.tag == FINITE else Fraction(0)

    def dump(self) -> str:
        """Debug listing in the JSON style of model files, with node ids."""
        st = self.mdp.states
        doc = {
            "variant": self.variant,
            "depth": self.depth,
            "nodes": [
                {
                    "id": n.id,
                    "state": st[n.state],
                    "depth": n.depth,
                    "parent": n.parent,
                    "acc": [str(a) for a in n.acc],
                    "children": {lab: {str(c): str(p) for c, p in kids} for lab, kids in n.children.items()},
                    **({"terminal": str(self.terminal[n.id])} if n.id in self.terminal else {}),
                }
                for n in self.nodes
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def unfold(mdp: WeightedMdp, depth: int, budget: int = DEFAULT_BUDGET) -> UnfoldedTree:
    """All histories of length <= ``depth`` from the initial state, as a tree."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    zero = (Fraction(0), Fraction(0))
    nodes: list[TreeNode] = [TreeNode(0, mdp.initial, 0, None, zero)]
    kids: list[dict[str, tuple]] = [{}]
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if node.state != mdp.goal and node.depth < depth:
            made: dict[int, int] = {}
            for e in mdp.edges[node.state]:
                out = []
                for t, p in e.dist:
                    if not p:
                        continue
                    if t not in made:
                        if len(nodes) >= budget:
                            raise BudgetExceeded(f"unfolding to depth {depth} needs more than {budget} nodes")
                        acc = (node.acc[0] + mdp.weight(W1, node.state, t), node.acc[1] + mdp.weight(W2, node.state, t))
                        made[t] = len(nodes)
                        nodes.append(TreeNode(len(nodes), t, node.depth + 1, node.id, acc))
                        kids.append({})
                    out.append((made[t], p))
                kids[i][e.label] = tuple(out)
        i += 1
    nodes = [replace(n, children=k) for n, k in zip(nodes, kids)]
    return UnfoldedTree(mdp, depth, nodes)


def hat(tree: UnfoldedTree, ssp: SspSolution | Mapping[int, SspValue]) -> UnfoldedTree:
    """Attach the w2 shortest-path value of each depth-N non-Goal leaf."""
    if tree.variant != PLAIN:
        raise ValueError("hat() expects a plain unfolding")
    values = ssp.values if isinstance(ssp, SspSolution) else ssp
    terminal = {}
    for n in tree.nodes:
        if not n.children and n.state != tree.goal:
            terminal[n.id] = values[n.state]
    return UnfoldedTree(tree.mdp, tree.depth, tree.nodes, HAT, terminal)


def lift_strategy(sigma: Strategy, tree: UnfoldedTree) -> TreeStrategy:
    """The tree strategy playing like ``sigma`` on every history of the tree."""
    table: dict[int, dict[str, Fraction]] = {}
    mem = {tree.root: sigma.initial_memory(tree.nodes[tree.root].state)}
    for node in tree.nodes:
        if node.parent is not None:
            mem[node.id] = sigma.update(mem[node.parent], tree.nodes[node.parent].state, node.state)
        if node.children:
            dist = {lab: Fraction(p) for lab, p in sigma.choose(mem[node.id], node.state).items() if p}
            for lab in dist:
                if lab not in node.children:
                    raise StrategyError(f"label {lab!r} not enabled at node {node.id}")
            table[node.id] = dist
    return TreeStrategy(tree, table)


def lower_strategy(
    tau: TreeStrategy,
    tail: MemorylessStrategy,
    k: int | None = None,
    middle: MemorylessStrategy | None = None,
) -> CompositeStrategy:
    """Play ``tau`` on the tree, then ``middle`` until step ``k``, then ``tail``."""
    return CompositeStrategy(tau, tau.tree.depth if k is None else k, tail, middle)


__all__ = [
    "BOTTOM",
    "HAT",
    "INFEASIBLE",
    "PLAIN",
    "TreeNode",
    "UnfoldedTree",
    "hat",
    "lift_strategy",
    "lower_strategy",
    "unfold",
]
