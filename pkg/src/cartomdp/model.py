"""Weighted MDPs: types, validation, paths, payoffs and the text file format.

States are referred to by integer index everywhere in the API; names only
appear in files and reports. Weight functions are indexed from 0, so the
percentile weight is ``W1 = 0`` and the expectation weight ``W2 = 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

W1 = 0
W2 = 1

PHI_PLUS = "phi_plus"
PHI_MINUS = "phi_minus"
PSI = "psi"


class MdpError(ValueError):
    """Raised for invalid models or malformed model files."""


class MdpFormatError(MdpError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


def to_fraction(value: Any) -> Fraction:
    """Exact rational from an int, Fraction or string such as ``"1/3"`` or ``"2.1"``.

    Floats are refused: they would silently bring binary rounding in.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {value!r}") from exc
    raise TypeError(f"expected int, Fraction or str, got {type(value).__name__}")


@dataclass(frozen=True)
class Edge:
    """A stochastic edge: a label, a distribution and weights per target."""

    source: int
    label: str
    dist: tuple[tuple[int, Fraction], ...]
    weights: tuple[tuple[Fraction, ...], ...]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(t for t, p in self.dist if p > 0)

    def prob(self, target: int) -> Fraction:
        for t, p in self.dist:
            if t == target:
                return p
        return Fraction(0)

    def is_dirac(self) -> bool:
        return len(self.support) == 1

    def expected_weight(self, i: int) -> Fraction:
        return sum((p * w[i] for (_, p), w in zip(self.dist, self.weights)), Fraction(0))


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.rule}: {self.message}"


@dataclass(frozen=True)
class WeightedMdp:
    """A k-weighted MDP with a designated initial state and Goal sink.

    Instances are not validated on construction so that broken models can
    be inspected; call :func:`validate` (``parse_mdp`` does it for you).
    """

    states: tuple[str, ...]
    initial: int
    goal: int
    weight_names: tuple[str, ...]
    edges: tuple[tuple[Edge, ...], ...]
    query: Mapping[str, Fraction] = field(default_factory=dict, compare=False)

    @property
    def k(self) -> int:
        return len(self.weight_names)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.states)}

    @cached_property
    def _edge_by_label(self) -> tuple[dict[str, Edge], ...]:
        return tuple({e.label: e for e in es} for es in self.edges)

    @cached_property
    def _pair_weights(self) -> dict[tuple[int, int], tuple[Fraction, ...]]:
        table: dict[tuple[int, int], tuple[Fraction, ...]] = {}
        for es in self.edges:
            for e in es:
                for (t, p), w in zip(e.dist, e.weights):
                    if p > 0:
                        table.setdefault((e.source, t), w)
        return table

    def edge(self, state: int, label: str) -> Edge:
        try:
            return self._edge_by_label[state][label]
        except KeyError:
            raise KeyError(f"no edge {label!r} at state {self.states[state]!r}") from None

    def labels(self, state: int) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges[state])

    def weight(self, i: int, source: int, target: int) -> Fraction:
        """w_i(source, target) for an activated pair; 0 for pairs no edge activates."""
        w = self._pair_weights.get((source, target))
        return Fraction(0) if w is None else w[i]

    def goal_loop_label(self) -> str:
        return self.edges[self.goal][0].label

    def successors(self, state: int) -> set[int]:
        return {t for e in self.edges[state] for t in e.support}

    def pairs(self) -> Iterable[tuple[int, int]]:
        """Activated state pairs, excluding Goal's self-loop."""
        for (s, t) in self._pair_weights:
            if s != self.goal:
                yield s, t

    def name(self, state: int) -> str:
        return self.states[state]

    # construction helpers -------------------------------------------------

    @classmethod
    def build(
        cls,
        states: Sequence[str],
        initial: str,
        goal: str,
        edges: Iterable[tuple],
        weight_names: Sequence[str] = ("w1", "w2"),
        add_goal_loop: bool = True,
        query: Mapping[str, Any] | None = None,
    ) -> "WeightedMdp":
        """Build from names.

        Each edge is ``(source, label, {target: prob}, weights)`` where
        ``weights`` is either a k-sequence (same for every target) or a map
        ``target -> k-sequence``. Probabilities and weights may be ints,
        Fractions or rational strings.
        """
        index = {name: i for i, name in enumerate(states)}
        k = len(weight_names)
        per_state: list[list[Edge]] = [[] for _ in states]
        for source, label, dist, weights in edges:
            s = index[source]
            per_state[s].append(_make_edge(index, s, label, dist, weights, k))
        g = index[goal]
        if add_goal_loop and not per_state[g]:
            per_state[g].append(
                Edge(g, "loop", ((g, Fraction(1)),), (tuple(Fraction(0) for _ in range(k)),))
            )
        q = {key: to_fraction(v) for key, v in (query or {}).items()}
        return cls(
            tuple(states),
            index[initial],
            g,
            tuple(weight_names),
            tuple(tuple(es) for es in per_state),
            q,
        )


def _make_edge(index, s, label, dist, weights, k) -> Edge:
    targets = sorted(((index[t], to_fraction(p)) for t, p in dist.items()), key=lambda tp: tp[0])
    if isinstance(weights, Mapping):
        wmap = {index[t]: tuple(to_fraction(x) for x in w) for t, w in weights.items()}
        ws = tuple(wmap.get(t, tuple(Fraction(0) for _ in range(k))) for t, _ in targets)
    else:
        w = tuple(to_fraction(x) for x in weights)
        ws = tuple(w for _ in targets)
    return Edge(s, str(label), tuple(targets), ws)


# validation -------------------------------------------------------------------


def validate(mdp: WeightedMdp) -> list[Violation]:
    """Return every broken model invariant; an empty list means the model is valid."""
    out: list[Violation] = []
    n = mdp.n_states
    if not 0 <= mdp.initial < n:
        out.append(Violation("unknown state", "initial", "initial state not in states"))
    if not 0 <= mdp.goal < n:
        out.append(Violation("unknown state", "goal", "goal state not in states"))
        return out
    if len(set(mdp.states)) != n:
        out.append(Violation("duplicate state", "states", "state names must be unique"))
    pair_w: dict[tuple[int, int], tuple[tuple[Fraction, ...], str]] = {}
    for s, es in enumerate(mdp.edges):
        sname = mdp.states[s] if s < n else str(s)
        if not es:
            out.append(Violation("no outgoing edge", sname, "every state needs an edge"))
        seen: set[str] = set()
        for e in es:
            where = f"{sname}.{e.label}"
            if e.label in seen:
                out.append(Violation("duplicate label", where, "labels must be unique per state"))
            seen.add(e.label)
            total = Fraction(0)
            for (t, p), w in zip(e.dist, e.weights):
                if not 0 <= t < n:
                    out.append(Violation("unknown state", where, f"target index {t}"))
                    continue
                if p < 0 or p > 1:
                    out.append(Violation("probability out of range", where, f"{p} for {mdp.states[t]}"))
                total += p
                if len(w) != mdp.k:
                    out.append(Violation("weight arity", where, f"expected {mdp.k} weights, got {len(w)}"))
                    continue
                if p > 0:
                    prev = pair_w.get((s, t))
                    if prev is None:
                        pair_w[(s, t)] = (w, e.label)
                    elif prev[0] != w:
                        out.append(
                            Violation(
                                "weight conflict",
                                where,
                                f"pair ({sname},{mdp.states[t]}) weighted differently by edge {prev[1]}",
                            )
                        )
            if total != 1:
                out.append(Violation("distribution not normalized", where, f"probabilities sum to {total}"))
    g = mdp.goal
    gname = mdp.states[g]
    ges = mdp.edges[g] if g < len(mdp.edges) else ()
    if len(ges) != 1 or ges[0].support != (g,):
        out.append(Violation("goal not sink", gname, "Goal must have exactly one edge, a self-loop"))
    elif any(x != 0 for w in ges[0].weights for x in w):
        out.append(Violation("goal loop weight nonzero", f"{gname}.{ges[0].label}", "Goal self-loop weights must be 0"))
    return out


def check(mdp: WeightedMdp) -> WeightedMdp:
    violations = validate(mdp)
    if violations:
        raise MdpError("invalid model:\n  " + "\n  ".join(map(str, violations)))
    return mdp


# paths and payoffs --------------------------------------------------------------


def is_path(mdp: WeightedMdp, path: Sequence[int]) -> bool:
    return all(b in mdp.successors(a) for a, b in zip(path, path[1:]))


def accumulated_weight(mdp: WeightedMdp, path: Sequence[int], i: int, ell: int) -> Fraction:
    if ell < 0 or len(path) < ell + 1:
        raise ValueError(f"path of {len(path)} states is too short for {ell} steps")
    return sum((mdp.weight(i, path[j - 1], path[j]) for j in range(1, ell + 1)), Fraction(0))


def first_goal_index(mdp: WeightedMdp, path: Sequence[int]) -> int | None:
    for j, s in enumerate(path):
        if s == mdp.goal:
            return j
    return None


def truncated_sum(mdp: WeightedMdp, path: Sequence[int], i: int, goal_free: bool = False) -> Fraction | float:
    """Accumulated w_i up to the first Goal visit, ``math.inf`` if Goal is never visited.

    A finite prefix without Goal says nothing about the rest of the run, so
    it is an error unless the caller asserts ``goal_free`` (the run is known
    to avoid Goal forever).
    """
    j = first_goal_index(mdp, path)
    if j is None:
        if goal_free:
            return math.inf
        raise ValueError("prefix has not reached Goal; truncated sum undetermined")
    return accumulated_weight(mdp, path, i, j)


def classify_prefix(mdp: WeightedMdp, path: Sequence[int], horizon: int, nu1: Fraction) -> str:
    """Which of phi_N^+, phi_N^-, psi_N the first ``horizon`` steps decide."""
    if len(path) < horizon + 1:
        raise ValueError(f"path of {len(path)} states is too short for horizon {horizon}")
    j = first_goal_index(mdp, path[: horizon + 1])
    if j is None:
        return PSI
    return PHI_PLUS if accumulated_weight(mdp, path, W1, j) >= nu1 else PHI_MINUS


# file format -------------------------------------------------------------------


def serialize_mdp(mdp: WeightedMdp) -> str:
    edges = []
    for es in mdp.edges:
        for e in es:
            ws = {mdp.states[t]: [str(x) for x in w] for (t, _), w in zip(e.dist, e.weights)}
            distinct = {tuple(v) for v in ws.values()}
            edges.append(
                {
                    "source": mdp.states[e.source],
                    "label": e.label,
                    "distribution": {mdp.states[t]: str(p) for t, p in e.dist},
                    "weights": list(distinct.pop()) if len(distinct) == 1 else ws,
                }
            )
    doc: dict[str, Any] = {
        "states": list(mdp.states),
        "initial": mdp.states[mdp.initial],
        "goal": mdp.states[mdp.goal],
        "weights": list(mdp.weight_names),
        "edges": edges,
    }
    if mdp.query:
        doc["query"] = {key: str(v) for key, v in mdp.query.items()}
    return json.dumps(doc, indent=2) + "\n"


def _require(obj: Mapping, key: str, where: str) -> Any:
    if key not in obj:
        raise MdpFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def parse_mdp(text: str, validate_model: bool = True) -> WeightedMdp:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpFormatError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise MdpFormatError("top level must be an object")
    states = _require(doc, "states", "model")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise MdpFormatError("model: 'states' must be a list of names")
    index = {s: i for i, s in enumerate(states)}
    initial = _require(doc, "initial", "model")
    goal = _require(doc, "goal", "model")
    for key, val in (("initial", initial), ("goal", goal)):
        if val not in index:
            raise MdpFormatError(f"model: {key} {val!r} is not a declared state")
    wnames = _require(doc, "weights", "model")
    if not isinstance(wnames, list):
        raise MdpFormatError("model: 'weights' must be a list of names")
    raw_edges = _require(doc, "edges", "model")
    if not isinstance(raw_edges, list):
        raise MdpFormatError("model: 'edges' must be a list")
    rows = []
    for j, raw in enumerate(raw_edges):
        where = f"edges[{j}]"
        if not isinstance(raw, dict):
            raise MdpFormatError(f"{where}: must be an object")
        src = _require(raw, "source", where)
        label = _require(raw, "label", where)
        dist = _require(raw, "distribution", where)
        weights = _require(raw, "weights", where)
        if src not in index:
            raise MdpFormatError(f"{where}: unknown source {src!r}")
        if not isinstance(dist, dict) or not dist:
            raise MdpFormatError(f"{where}: 'distribution' must be a non-empty object")
        for t in dist:
            if t not in index:
                raise MdpFormatError(f"{where}.distribution: unknown state {t!r}")
        try:
            dist_q = {t: to_fraction(p) for t, p in dist.items()}
            if isinstance(weights, dict):
                for t in weights:
                    if t not in dist:
                        raise MdpFormatError(f"{where}.weights: {t!r} is not in the distribution")
                w_q: Any = {t: [to_fraction(x) for x in w] for t, w in weights.items()}
            else:
                w_q = [to_fraction(x) for x in weights]
        except (TypeError, ValueError) as exc:
            if isinstance(exc, MdpFormatError):
                raise
            raise MdpFormatError(f"{where}: {exc}") from None
        rows.append((src, label, dist_q, w_q))
    query = doc.get("query") or {}
    try:
        mdp = WeightedMdp.build(states, initial, goal, rows, wnames, add_goal_loop=False, query=query)
    except (TypeError, ValueError) as exc:
        raise MdpFormatError(f"query: {exc}") from None
    if validate_model:
        check(mdp)
    return mdp


def load_mdp(path: str) -> WeightedMdp:
    import sys

    if path == "-":
        return parse_mdp(sys.stdin.read())
    with open(path, encoding="utf-8") as fh:
        return parse_mdp(fh.read())
