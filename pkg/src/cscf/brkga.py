"""Biased random-key genetic algorithm over action sequences.

A genotype holds 2N keys in [0, 1]: the first N order the actions (ascending
key = earlier; key > 0.5 = unused), the last N pick each action's tweaking
value. Selection uses non-dominated sorting with feasibility-first
constrained dominance.
"""
from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence as Seq

import numpy as np

from .actions import Sequence
from .objectives import EvaluatedSolution, Problem, evaluate

logger = logging.getLogger(__name__)

INACTIVE_ABOVE = 0.5


# --------------------------------------------------------------------------
# decoding

class Decoder:
    """Maps key vectors to sequences for one action catalog.

    Finite value sets decode by uniform bins, intervals by linear
    interpolation. ``phenotype_key`` gives a hashable, totally ordered
    identity used for caching and deduplication.
    """

    def __init__(self, catalog, space):
        self.catalog = tuple(catalog)
        self.space = space
        self.n = len(self.catalog)
        self._choices = []
        self._bounds = []
        for a in self.catalog:
            desc = a.value_space
            feat = space[a.direct_feature]
            if desc.is_finite:
                self._choices.append(tuple(desc.choices(feat)))
                self._bounds.append(None)
            else:
                self._choices.append(None)
                self._bounds.append((desc.lo, desc.hi))

    def keys(self, population: np.ndarray) -> list[tuple]:
        """Phenotype keys for every row: ((action index, value code), ...)."""
        pop = np.atleast_2d(population)
        n = self.n
        acts = pop[:, :n]
        vals = pop[:, n:]
        order = np.argsort(acts, axis=1, kind="stable")
        active = acts <= INACTIVE_ABOVE
        codes = np.empty(vals.shape, dtype=object)
        for j in range(n):
            opts = self._choices[j]
            if opts is not None:
                codes[:, j] = np.minimum((vals[:, j] * len(opts)).astype(int), len(opts) - 1).tolist()
            else:
                lo, hi = self._bounds[j]
                codes[:, j] = (lo + vals[:, j] * (hi - lo)).tolist()
        out = []
        for r in range(pop.shape[0]):
            row_active = active[r]
            row_codes = codes[r]
            out.append(tuple((int(j), row_codes[j]) for j in order[r] if row_active[j]))
        return out

    def sequence(self, key: tuple) -> Sequence:
        pairs = []
        for j, code in key:
            opts = self._choices[j]
            pairs.append((self.catalog[j].id, opts[code] if opts is not None else code))
        return Sequence(tuple(pairs))

    def decode(self, genotype) -> Sequence:
        g = np.asarray(genotype, dtype=float)
        if g.shape != (2 * self.n,):
            raise ValueError(f"genotype must have length {2 * self.n}, got {g.shape}")
        return self.sequence(self.keys(g[None, :])[0])


def decode(genotype, catalog, space) -> Sequence:
    return Decoder(catalog, space).decode(genotype)


# --------------------------------------------------------------------------
# dominance

def dominates(u: Seq[float], v: Seq[float]) -> bool:
    """Pareto dominance under minimisation."""
    if len(u) != len(v):
        raise ValueError(f"objective vectors differ in length: {len(u)} vs {len(v)}")
    better = False
    for a, b in zip(u, v):
        if a > b:
            return False
        if a < b:
            better = True
    return better


def dominance_matrix(objectives: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True iff row i Pareto-dominates row j."""
    F = np.asarray(objectives, dtype=float)
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    return le & lt


def constrained_dominance_matrix(objectives, feasible, violations) -> np.ndarray:
    """Feasible beats infeasible; fewer violations beat more; ties fall back to Pareto."""
    feas = np.asarray(feasible, dtype=bool)
    viol = np.asarray(violations)
    D = dominance_matrix(objectives)
    same_class = (feas[:, None] == feas[None, :]) & (feas[:, None] | (viol[:, None] == viol[None, :]))
    D &= same_class
    D |= feas[:, None] & ~feas[None, :]
    both_infeasible = ~feas[:, None] & ~feas[None, :]
    D |= both_infeasible & (viol[:, None] < viol[None, :])
    return D


def _peel(D: np.ndarray) -> list[list[int]]:
    n = D.shape[0]
    count = D.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front.tolist())
        remaining[front] = False
        count = count - D[front].sum(axis=0)
    return fronts


def nondominated_sort(solutions: Seq[EvaluatedSolution]) -> list[list[int]]:
    """Partition solution indices into fronts under constrained dominance."""
    if not solutions:
        return []
    F = np.array([s.objectives for s in solutions], dtype=float)
    feas = [s.feasible for s in solutions]
    viol = [s.violation_count for s in solutions]
    return _peel(constrained_dominance_matrix(F, feas, viol))


def pareto_indices(objectives: np.ndarray) -> np.ndarray:
    """Indices of the rows not dominated by any other row."""
    if len(objectives) == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(~dominance_matrix(objectives).any(axis=0))


# --------------------------------------------------------------------------
# variation

def biased_crossover(elite, non_elite, bias: float, rng: np.random.Generator) -> np.ndarray:
    """Take each key from ``elite`` with probability ``bias``, else from ``non_elite``."""
    elite = np.asarray(elite, dtype=float)
    non_elite = np.asarray(non_elite, dtype=float)
    if elite.shape != non_elite.shape:
        raise ValueError("parents differ in length")
    mask = rng.random(elite.shape) < bias
    return np.where(mask, elite, non_elite)


# --------------------------------------------------------------------------
# driver

@dataclass
class BrkgaParams:
    population_size: int = 500
    mutant_fraction: float = 0.2
    offspring_fraction: float = 0.8
    crossover_bias: float = 0.7
    elite_capacity_fraction: float = 0.2
    generations: int = 150
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        for name in ("mutant_fraction", "offspring_fraction", "crossover_bias", "elite_capacity_fraction"):
            x = getattr(self, name)
            if not 0.0 < x < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {x}")
        if self.mutant_fraction + self.offspring_fraction > 1.0 + 1e-12:
            raise ValueError("mutant_fraction + offspring_fraction must not exceed 1")
        if self.n_mutants + self.elite_capacity >= self.population_size:
            raise ValueError("elites and mutants leave no room for offspring")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")

    @property
    def n_mutants(self) -> int:
        return max(1, int(round(self.mutant_fraction * self.population_size)))

    @property
    def elite_capacity(self) -> int:
        return max(1, int(round(self.elite_capacity_fraction * self.population_size)))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class GenerationStats:
    generation: int
    feasible: int
    front_size: int
    best_cost: float | None
    best_distance: float | None
    elites: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Front:
    solutions: list[EvaluatedSolution]
    stats: list[GenerationStats] = field(default_factory=list)
    best_violation_count: int | None = None
    evaluations: int = 0
    archive: list[EvaluatedSolution] | None = None

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def objective_set(self, ndigits: int | None = None) -> set[tuple]:
        if ndigits is None:
            return {tuple(s.objectives) for s in self.solutions}
        return {tuple(round(o, ndigits) for o in s.objectives) for s in self.solutions}


def phenotype_sort_key(sol: EvaluatedSolution) -> tuple:
    return (sol.objectives, tuple((a, _value_key(v)) for a, v in sol.sequence.pairs))


def _value_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0.0, str(v))


def finalize_front(solutions: Seq[EvaluatedSolution]) -> list[EvaluatedSolution]:
    """Feasible, mutually non-dominated, phenotype-deduplicated, sorted."""
    seen, unique = set(), []
    for s in solutions:
        if not s.feasible:
            continue
        key = s.sequence.pairs
        if key in seen:
            continue
        seen.add(key)
        unique.append(s)
    if not unique:
        return []
    F = np.array([s.objectives for s in unique], dtype=float)
    keep = pareto_indices(F)
    return sorted((unique[i] for i in keep), key=phenotype_sort_key)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CSCF_THREADS", "1")))
    except ValueError:
        return 1


class Evaluator:
    """Phenotype-keyed evaluation cache with optional threaded misses.

    Results land in slots fixed before any work starts, so the outcome does
    not depend on completion order or thread count.
    """

    def __init__(self, problem: Problem, decoder: Decoder, threads: int | None = None):
        self.problem = problem
        self.decoder = decoder
        self.threads = worker_count() if threads is None else threads
        self.cache: dict[tuple, EvaluatedSolution] = {}
        self.evaluations = 0

    def __call__(self, keys: Seq[tuple]) -> list[EvaluatedSolution]:
        missing = list(dict.fromkeys(k for k in keys if k not in self.cache))
        if missing:
            seqs = [self.decoder.sequence(k) for k in missing]
            if self.threads > 1 and len(seqs) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    results = list(pool.map(lambda s: evaluate(self.problem, s), seqs))
            else:
                results = [evaluate(self.problem, s) for s in seqs]
            for k, r in zip(missing, results):
                self.cache[k] = r
        self.evaluations += len(keys)
        return [self.cache[k] for k in keys]


def evolve(problem: Problem, params: BrkgaParams | None = None, *,
           keep_archive: bool = False, threads: int | None = None,
           on_generation: Callable[[GenerationStats], None] | None = None) -> Front:
    """Run the generational loop and return the feasible front of the last population.

    Random draws come from one seeded generator in a fixed order: the
    initial population, then per generation the mutants followed by the
    offspring parent picks and crossover masks.
    """
    params = params or BrkgaParams()
    if not problem.catalog:
        raise ValueError("action catalog is empty")
    if problem.blackbox.accepts(problem.x0):
        logger.warning("x0 is already accepted by the classifier; recourse is vacuous")
    rng = np.random.default_rng(params.seed)
    decoder = Decoder(problem.catalog, problem.space)
    evaluator = Evaluator(problem, decoder, threads)
    pop_size = params.population_size
    width = 2 * decoder.n
    max_offspring = int(round(params.offspring_fraction * pop_size))

    population = rng.random((pop_size, width))
    stats: list[GenerationStats] = []
    best_violation = None
    gen = 0
    while True:
        keys = decoder.keys(population)
        sols = evaluator(keys)
        feas = np.fromiter((s.feasible for s in sols), dtype=bool, count=pop_size)
        viol = min(s.violation_count for s in sols)
        best_violation = viol if best_violation is None else min(best_violation, viol)
        elite_idx, front_idx = _select_elites(sols, keys, feas, params.elite_capacity)
        stat = GenerationStats(gen, int(feas.sum()), len(front_idx),
                               min((sols[i].objectives[0] for i in front_idx), default=None),
                               min((sols[i].objectives[1] for i in front_idx), default=None),
                               len(elite_idx))
        stats.append(stat)
        if on_generation is not None:
            on_generation(stat)
        if gen == params.generations:
            break
        gen += 1

        n_elite = len(elite_idx)
        n_mut = params.n_mutants
        n_off = pop_size - n_elite - n_mut
        if n_off > max_offspring:
            n_mut += n_off - max_offspring
            n_off = max_offspring
        mutants = rng.random((n_mut, width))
        if n_elite:
            elite_mask = np.zeros(pop_size, dtype=bool)
            elite_mask[elite_idx] = True
            non_elite_idx = np.flatnonzero(~elite_mask)
            a = np.asarray(elite_idx)[rng.integers(n_elite, size=n_off)]
            b = non_elite_idx[rng.integers(len(non_elite_idx), size=n_off)]
        else:
            a = rng.integers(pop_size, size=n_off)
            b = rng.integers(pop_size, size=n_off)
        mask = rng.random((n_off, width)) < params.crossover_bias
        offspring = np.where(mask, population[a], population[b])
        population = np.vstack([population[elite_idx], mutants, offspring])

    final = []
    for i in _feasible_front(sols, feas):
        final.append(dataclasses.replace(sols[i], genotype=population[i].copy()))
    front = Front(finalize_front(final), stats, best_violation, evaluator.evaluations)
    if keep_archive:
        front.archive = list(evaluator.cache.values())
    if not front.solutions:
        logger.warning("no feasible solution found; best violation count %s", best_violation)
    return front


def _feasible_front(sols: Seq[EvaluatedSolution], feas: np.ndarray) -> list[int]:
    idx = np.flatnonzero(feas)
    if not len(idx):
        return []
    F = np.array([sols[i].objectives for i in idx], dtype=float)
    return idx[pareto_indices(F)].tolist()


def _select_elites(sols, keys, feas, capacity: int) -> tuple[list[int], list[int]]:
    front = _feasible_front(sols, feas)
    seen, unique = set(), []
    for i in front:
        if keys[i] not in seen:
            seen.add(keys[i])
            unique.append(i)
    unique.sort(key=lambda i: (sols[i].objectives[0], sols[i].objectives[1], keys[i]))
    return unique[:capacity], front
