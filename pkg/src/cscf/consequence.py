"""Consequence-aware cost model.

The cost of one step is its direct effort scaled by a discount in [0, 1]
read off the feature-relationship graph at the state *before* the step.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Sequence as Seq

from .actions import Action, Rollout, Sequence, catalog_index
from .feature_space import FeatureSpace


class CostModelError(ValueError):
    pass


# --------------------------------------------------------------------------
# efforts

@dataclass(frozen=True)
class EffortFn:
    """Direct effort of an action.

    ``constant`` ignores the states, ``per_unit`` charges ``rate`` per unit of
    change of the direct feature (level steps for ordered features, 0/1 for
    unordered ones), ``table`` looks up the (from, to) transition.
    """

    kind: str
    value: float = 0.0
    table: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("constant", "per_unit", "table"):
            raise CostModelError(f"unknown effort kind {self.kind!r}")
        if self.kind != "table" and not float(self.value) >= 0:
            raise CostModelError(f"effort {self.kind} needs a value >= 0")
        if any(not c >= 0 for c in self.table.values()):
            raise CostModelError("effort table entries must be >= 0")

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "entries": [[a, b, c] for (a, b), c in self.table.items()]}
        key = "rate" if self.kind == "per_unit" else "value"
        return {"kind": self.kind, key: self.value}


def constant(c: float) -> EffortFn:
    return EffortFn("constant", float(c))


def per_unit(rate: float) -> EffortFn:
    return EffortFn("per_unit", float(rate))


def table(entries: Mapping[tuple, float]) -> EffortFn:
    return EffortFn("table", table={tuple(k): float(v) for k, v in entries.items()})


def direct_delta(space: FeatureSpace, before: Seq, after: Seq, h: int) -> float:
    feat = space[h]
    if feat.kind == "categorical":
        return float(before[h] != after[h])
    return abs(feat.rank(after[h]) - feat.rank(before[h]))


def effort(effort_fn: EffortFn, before: Seq, after: Seq, direct_feature: int,
           space: FeatureSpace | None = None) -> float:
    """Evaluate the direct effort of moving from ``before`` to ``after``.

    ``space`` is only needed for ``per_unit`` on categorical features.
    """
    kind = effort_fn.kind
    if kind == "constant":
        return effort_fn.value
    h = direct_feature
    if kind == "per_unit":
        if space is None:
            delta = abs(after[h] - before[h])
        else:
            delta = direct_delta(space, before, after, h)
        return effort_fn.value * delta
    pair = (before[h], after[h])
    try:
        return effort_fn.table[pair]
    except KeyError:
        raise CostModelError(f"effort table has no entry for missing pair {pair[0]!r} -> {pair[1]!r}") from None


# --------------------------------------------------------------------------
# consequence graph

_THRESH = {"<": operator.lt, "<=": operator.le, ">=": operator.ge, ">": operator.gt}


@dataclass(frozen=True)
class TauFn:
    """Edge function mapping a state to a discount factor in [0, 1].

    ``level_map``: ``mapping.get(x[source], default)``.
    ``threshold_step``: ``then`` if ``x[source] <op> threshold`` else ``otherwise``
    (ordered labels compare by level position).
    """

    source: int
    kind: str
    mapping: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0
    op: str = ">="
    threshold: object = None
    then: float = 1.0
    otherwise: float = 1.0

    def __post_init__(self):
        if self.kind not in ("level_map", "threshold_step"):
            raise CostModelError(f"unknown tau kind {self.kind!r}")
        if self.kind == "threshold_step" and self.op not in _THRESH:
            raise CostModelError(f"threshold operator must be one of {sorted(_THRESH)}")
        for x in (*self.mapping.values(), self.default, self.then, self.otherwise):
            if not 0.0 <= x <= 1.0:
                raise CostModelError(f"tau values must lie in [0, 1], got {x}")

    def __call__(self, state: Seq, space: FeatureSpace) -> float:
        value = state[self.source]
        if self.kind == "level_map":
            return self.mapping.get(value, self.default)
        feat = space[self.source]
        lhs, rhs = value, self.threshold
        if feat.is_ordered:
            lhs, rhs = feat.rank(lhs), feat.rank(rhs)
        return self.then if _THRESH[self.op](lhs, rhs) else self.otherwise


def level_map(source: int, mapping: Mapping[str, float], default: float = 1.0) -> TauFn:
    return TauFn(source, "level_map", mapping=dict(mapping), default=float(default))


def threshold_step(source: int, op: str, threshold, then: float, otherwise: float) -> TauFn:
    return TauFn(source, "threshold_step", op=op, threshold=threshold, then=float(then),
                 otherwise=float(otherwise))


class ConsequenceGraph:
    """Directed feature graph whose edges carry discount functions.

    Nodes default to the endpoints of the edges; extra isolated nodes may be
    listed explicitly since node membership decides which affected features
    enter the action discount average.
    """

    def __init__(self, edges: Iterable[tuple[int, int, TauFn]], nodes: Iterable[int] = ()):
        self.edges: tuple[tuple[int, int, TauFn], ...] = tuple(edges)
        found = set(nodes)
        incoming: dict[int, list[TauFn]] = {}
        seen = set()
        for k, h, tau in self.edges:
            if k == h:
                raise CostModelError(f"self-loop on feature {k}")
            if (k, h) in seen:
                raise CostModelError(f"duplicate edge {k} -> {h}")
            if tau.source != k:
                raise CostModelError(f"edge {k} -> {h}: tau reads feature {tau.source}, not its source")
            seen.add((k, h))
            found.update((k, h))
            incoming.setdefault(h, []).append(tau)
        self.nodes = frozenset(found)
        self._incoming = {h: tuple(t) for h, t in incoming.items()}

    def incoming(self, h: int) -> tuple[TauFn, ...]:
        return self._incoming.get(h, ())


def feature_discount(graph: ConsequenceGraph | None, state: Seq, h: int, space: FeatureSpace) -> float:
    """Mean of the incoming edge values of feature ``h``; 1.0 without incoming edges."""
    if graph is None:
        return 1.0
    taus = graph.incoming(h)
    if not taus:
        return 1.0
    return fmean(tau(state, space) for tau in taus)


def action_discount(graph: ConsequenceGraph | None, state: Seq, affected: Iterable[int],
                    space: FeatureSpace) -> float:
    """Mean feature discount over the affected features that are graph nodes."""
    if graph is None:
        return 1.0
    members = sorted(h for h in affected if h in graph.nodes)
    if not members:
        return 1.0
    return fmean(feature_discount(graph, state, h, space) for h in members)


# --------------------------------------------------------------------------
# sequence cost

@dataclass(frozen=True)
class CostConfig:
    efforts: Mapping[str, EffortFn]
    graph: ConsequenceGraph | None = None
    discount_enabled: bool = True

    def check_catalog(self, catalog: Seq[Action]) -> None:
        missing = [a.id for a in catalog if a.id not in self.efforts]
        if missing:
            raise CostModelError(f"no effort defined for action(s) {missing}")

    def without_discount(self) -> "CostConfig":
        return CostConfig(self.efforts, self.graph, False)


@dataclass(frozen=True)
class SequenceCost:
    total: float
    steps: tuple[float, ...]
    discounts: tuple[float, ...]
    efforts: tuple[float, ...]

    @property
    def undiscounted(self) -> float:
        return sum(self.efforts)


def sequence_cost(config: CostConfig, catalog, ro: Rollout, seq: Sequence,
                  space: FeatureSpace) -> SequenceCost:
    """Sum of ``effort * discount`` over the steps of a rollout.

    The discount of step t reads the state before the step; efforts read the
    state pair around it.
    """
    index = catalog if isinstance(catalog, dict) else catalog_index(catalog)
    graph = config.graph if config.discount_enabled else None
    steps, discounts, efforts = [], [], []
    for t, (aid, _) in enumerate(seq.pairs):
        action = index[aid]
        before, after = ro.states[t], ro.states[t + 1]
        b = effort(config.efforts[aid], before, after, action.direct_feature, space)
        g = action_discount(graph, before, action.affected, space)
        efforts.append(b)
        discounts.append(g)
        steps.append(b * g)
    return SequenceCost(sum(steps), tuple(steps), tuple(discounts), tuple(efforts))


# --------------------------------------------------------------------------
# (de)serialization

def effort_from_dict(d: dict) -> EffortFn:
    kind = d.get("kind")
    if kind == "constant":
        return constant(d.get("value", 0.0))
    if kind == "per_unit":
        return per_unit(d.get("rate", d.get("value", 0.0)))
    if kind == "table":
        entries = d.get("entries", [])
        return table({(str(a), str(b)): c for a, b, c in entries})
    raise CostModelError(f"unknown effort kind {kind!r}")


def tau_from_dict(d: dict, space: FeatureSpace, source: int) -> TauFn:
    kind = d.get("kind")
    if kind == "level_map":
        mapping = d.get("map", {})
        feat = space[source]
        for label in mapping:
            if not feat.has_level(label):
                raise CostModelError(f"tau level {label!r} is not a level of {feat.name!r}")
        return level_map(source, mapping, d.get("default", 1.0))
    if kind == "threshold_step":
        feat = space[source]
        thr = d.get("threshold")
        if feat.is_categorical and not (feat.is_ordered and feat.has_level(thr)):
            raise CostModelError(f"threshold {thr!r} invalid for feature {feat.name!r}")
        return threshold_step(source, d.get("op", ">="), thr, d.get("then", 1.0), d.get("else", 1.0))
    raise CostModelError(f"unknown tau kind {kind!r}")


def graph_from_dict(d: dict, space: FeatureSpace) -> ConsequenceGraph:
    edges = []
    for e in d.get("edges", ()):
        k, h = space.resolve(e["source"]), space.resolve(e["target"])
        edges.append((k, h, tau_from_dict(e.get("tau", {}), space, k)))
    nodes = [space.resolve(n) for n in d.get("nodes", ())]
    return ConsequenceGraph(edges, nodes)


def graph_to_dict(graph: ConsequenceGraph, space: FeatureSpace) -> dict:
    edges = []
    for k, h, tau in graph.edges:
        if tau.kind == "level_map":
            td = {"kind": "level_map", "map": dict(tau.mapping), "default": tau.default}
        else:
            td = {"kind": "threshold_step", "op": tau.op, "threshold": tau.threshold,
                  "then": tau.then, "else": tau.otherwise}
        edges.append({"source": space[k].name, "target": space[h].name, "tau": td})
    return {"nodes": sorted(space[n].name for n in graph.nodes), "edges": edges}
