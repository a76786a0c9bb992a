"""Exact rational linear algebra for absorbing Markov chains."""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

import networkx as nx


class SingularSystemError(ArithmeticError):
    pass


def solve_linear(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Solve ``a x = b`` by Gauss-Jordan elimination over the rationals."""
    n = len(b)
    m = [list(row) + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError(f"no pivot in column {col}")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        prow = [x * inv for x in m[col]]
        m[col] = prow
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                row = m[r]
                m[r] = [x - f * y for x, y in zip(row, prow)]
    return [m[r][n] for r in range(n)]


def reaches(succ: Sequence[Sequence[int]], targets: set[int]) -> set[int]:
    """Nodes with a path (positive probability) to some node in ``targets``."""
    pred: list[list[int]] = [[] for _ in succ]
    for i, js in enumerate(succ):
        for j in js:
            pred[j].append(i)
    seen = set(targets)
    stack = list(targets)
    while stack:
        j = stack.pop()
        for i in pred[j]:
            if i not in seen:
                seen.add(i)
                stack.append(i)
    return seen


def solve_chain(
    trans: Sequence[Sequence[tuple[int, Fraction]]],
    reward: Sequence[Fraction],
    fixed: Mapping[int, Fraction],
) -> list[Fraction]:
    """Values ``V_i = reward_i + sum_j p_ij V_j`` with ``V`` given on ``fixed``.

    Every free node must reach ``fixed`` with probability one, otherwise the
    system is singular. Strongly connected components are solved one at a
    time in reverse topological order, so acyclic chains cost a single pass.
    """
    n = len(trans)
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for i, row in enumerate(trans):
        if i in fixed:
            continue
        for j, p in row:
            if p:
                g.add_edge(i, j)
    cond = nx.condensation(g)
    values: list[Fraction | None] = [None] * n
    for i, v in fixed.items():
        values[i] = Fraction(v)
    for c in reversed(list(nx.topological_sort(cond))):
        members = [i for i in cond.nodes[c]["members"] if i not in fixed]
        if not members:
            continue
        if len(members) == 1:
            i = members[0]
            self_p = Fraction(0)
            acc = Fraction(reward[i])
            for j, p in trans[i]:
                if j == i:
                    self_p += p
                else:
                    acc += p * values[j]
            if self_p == 1:
                raise SingularSystemError(f"node {i} never leaves itself")
            values[i] = acc / (1 - self_p)
            continue
        pos = {i: r for r, i in enumerate(members)}
        size = len(members)
        a = [[Fraction(0)] * size for _ in range(size)]
        b = [Fraction(0)] * size
        for r, i in enumerate(members):
            a[r][r] += 1
            b[r] = Fraction(reward[i])
            for j, p in trans[i]:
                if j in pos:
                    a[r][pos[j]] -= p
                else:
                    b[r] += p * values[j]
        for i, v in zip(members, solve_linear(a, b)):
            values[i] = v
    return values  # type: ignore[return-value]
