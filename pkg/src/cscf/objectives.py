"""Objective vector (cost, Gower distance, per-feature tweak counts) and the
feasibility verdict for a candidate sequence."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence as Seq

import numpy as np

from .actions import Action, Rollout, Sequence, catalog_index, rollout, validate_catalog
from .classifier import ACCEPT_THRESHOLD, BlackBox
from .consequence import CostConfig, sequence_cost
from .feature_space import FeatureSpace, Instance, validate_instance


def gower(space: FeatureSpace, a: Seq, b: Seq) -> float:
    """Mean per-feature distance in [0, 1].

    Numeric features use ``|a - b| / (max - min)``, ordered categoricals the
    level distance over ``L - 1``, unordered ones a 0/1 mismatch.
    """
    total = 0.0
    for f, x, y in zip(space.features, a, b):
        if f.is_numeric:
            total += abs(x - y) / f.span
        elif f.is_ordered:
            if len(f.levels) > 1:
                total += abs(f.level_index(x) - f.level_index(y)) / (len(f.levels) - 1)
        else:
            total += x != y
    return total / len(space)


def tweak_frequencies(catalog, seq: Sequence, d: int) -> tuple[int, ...]:
    """How many actions of ``seq`` list each feature among their affected set."""
    index = catalog if isinstance(catalog, dict) else catalog_index(catalog)
    counts = [0] * d
    for aid, _ in seq:
        for h in index[aid].affected:
            counts[h] += 1
    return tuple(counts)


@dataclass(frozen=True)
class Problem:
    """Everything needed to score a sequence for one starting instance."""

    space: FeatureSpace
    catalog: tuple[Action, ...]
    cost: CostConfig
    blackbox: BlackBox
    x0: Instance

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "x0", tuple(self.x0))
        validate_catalog(self.space, self.catalog)
        self.cost.check_catalog(self.catalog)
        report = validate_instance(self.space, self.x0)
        if not report.ok:
            raise ValueError(f"x0 is not a valid instance: {report.violations}")

    @property
    def index(self) -> dict[str, Action]:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = catalog_index(self.catalog)
            object.__setattr__(self, "_index", idx)
        return idx

    @property
    def n_objectives(self) -> int:
        return 2 + len(self.space)

    def with_x0(self, x0) -> "Problem":
        return Problem(self.space, self.catalog, self.cost, self.blackbox, x0)

    def with_cost(self, cost: CostConfig) -> "Problem":
        return Problem(self.space, self.catalog, cost, self.blackbox, self.x0)


@dataclass
class EvaluatedSolution:
    sequence: Sequence
    states: list[Instance]
    violation_count: int
    objectives: tuple[float, ...]
    feasible: bool
    p_accept: float
    cost_undiscounted: float
    step_costs: tuple[float, ...] = ()
    step_discounts: tuple[float, ...] = ()
    genotype: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def final(self) -> Instance:
        return self.states[-1]

    @property
    def cost(self) -> float:
        return self.objectives[0]

    @property
    def distance(self) -> float:
        return self.objectives[1]

    @property
    def frequencies(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.objectives[2:])

    @property
    def length(self) -> int:
        return len(self.sequence)


def evaluate(problem: Problem, seq: Sequence) -> EvaluatedSolution:
    """Roll out ``seq`` from the problem's x0 and score it.

    Infeasible sequences still get a full objective vector; an empty
    sequence counts one extra violation.
    """
    index = problem.index
    space = problem.space
    ro: Rollout = rollout(space, problem.x0, index, seq)
    costs = sequence_cost(problem.cost, index, ro, seq, space)
    xT = ro.final
    dist = gower(space, problem.x0, xT)
    freqs = tweak_frequencies(index, seq, len(space))
    violations = ro.violation_count + (len(seq) == 0)
    p = problem.blackbox.proba(xT)
    feasible = violations == 0 and p >= ACCEPT_THRESHOLD
    objectives = (float(costs.total), float(dist), *(float(c) for c in freqs))
    if not all(math.isfinite(o) for o in objectives):
        raise ValueError(f"non-finite objectives {objectives}")
    return EvaluatedSolution(seq, ro.states, violations, objectives, feasible, p,
                             float(costs.undiscounted), costs.steps, costs.discounts)
