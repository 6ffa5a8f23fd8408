"""Exhaustive enumeration of the feasible Pareto front on small problems."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence as Seq

import numpy as np

from .actions import Sequence
from .brkga import Front, finalize_front
from .objectives import Problem, evaluate

MAX_ACTIONS = 6
DEFAULT_CAP = 10**7


class OracleError(ValueError):
    pass


@dataclass
class OracleConfig:
    """Per-action value grids; actions with a finite value descriptor may be omitted."""

    grids: Mapping[str, Seq] = field(default_factory=dict)
    cap: int = DEFAULT_CAP


def resolve_grids(problem: Problem, config: OracleConfig) -> list[tuple]:
    grids = []
    for a in problem.catalog:
        if a.id in config.grids:
            g = tuple(config.grids[a.id])
        elif a.value_space.is_finite:
            g = tuple(a.value_space.choices(problem.space[a.direct_feature]))
        else:
            raise OracleError(f"oracle requires finite grids: action {a.id!r} has a continuous value space")
        if not g:
            raise OracleError(f"empty value grid for action {a.id!r}")
        grids.append(g)
    return grids


def enumeration_size(grid_sizes: Seq[int]) -> int:
    """Number of ordered action subsets times value assignments."""
    n = len(grid_sizes)
    total = 0
    for k in range(1, n + 1):
        for subset in itertools.combinations(grid_sizes, k):
            total += math.factorial(k) * math.prod(subset)
    return total


def enumerate_front(problem: Problem, config: OracleConfig | None = None) -> tuple[Front, int]:
    """Evaluate every ordered subset of distinct actions on every grid assignment.

    Returns the exact feasible non-dominated set (relative to the grids) and
    the number of sequences evaluated.
    """
    config = config or OracleConfig()
    n = len(problem.catalog)
    if n > MAX_ACTIONS:
        raise OracleError(f"oracle handles at most {MAX_ACTIONS} actions, got {n}")
    grids = resolve_grids(problem, config)
    size = enumeration_size([len(g) for g in grids])
    if size > config.cap:
        raise OracleError(f"enumeration size {size} exceeds cap {config.cap}")
    ids = [a.id for a in problem.catalog]
    feasible = []
    count = 0
    for k in range(1, n + 1):
        for perm in itertools.permutations(range(n), k):
            for values in itertools.product(*(grids[j] for j in perm)):
                sol = evaluate(problem, Sequence(tuple((ids[j], v) for j, v in zip(perm, values))))
                count += 1
                if sol.feasible:
                    feasible.append(sol)
    front = finalize_front(feasible)
    _verify(front, feasible)
    return Front(front, evaluations=count), count


def _verify(front, feasible) -> None:
    """Quadratic check: every feasible solution is dominated by or equal to a member."""
    if not feasible:
        return
    F = np.array([s.objectives for s in front], dtype=float)
    G = np.array([s.objectives for s in feasible], dtype=float)
    covered = (F[:, None, :] <= G[None, :, :]).all(axis=2).any(axis=0)
    if not covered.all():
        raise AssertionError("oracle front does not cover every feasible solution")
