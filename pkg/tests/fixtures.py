"""Problem builders shared by the test modules."""
from __future__ import annotations

import functools

import numpy as np

from cscf.actions import (Action, Constraint, EffectRule, grid, level_subset, monotone_levels, numeric_monotone,
                          parse_predicate)
from cscf.classifier import BlackBox, Encoding, ModelSpec, model_to_dict
from cscf.consequence import ConsequenceGraph, CostConfig, constant, level_map, per_unit, threshold_step
from cscf.feature_space import FeatureDef, FeatureSpace
from cscf.objectives import Problem

# --------------------------------------------------------------------------
# three-action job/education/location example

TRIO_X0 = ("Seller", "HS", "Germany")


def trio_space() -> FeatureSpace:
    return FeatureSpace([
        FeatureDef.categorical("Job", ["Seller", "Developer"]),
        FeatureDef.ordered("Edu", ["HS", "BSc", "MSc"]),
        FeatureDef.categorical("Loc", ["Germany", "US"]),
    ])


def trio_catalog() -> list[Action]:
    return [
        Action("a1", 0, level_subset(["Developer"])),
        Action("a2", 1, level_subset(["BSc"])),
        Action("a3", 2, level_subset(["US"])),
    ]


def trio_graph() -> ConsequenceGraph:
    return ConsequenceGraph([
        (2, 1, level_map(2, {"US": 1.0}, default=0.5)),
        (2, 0, level_map(2, {"US": 0.5}, default=1.0)),
        (1, 0, threshold_step(1, ">=", "BSc", 0.5, 1.0)),
    ])


def trio_cost(discount=True, with_graph=True) -> CostConfig:
    efforts = {"a1": constant(10), "a2": constant(5), "a3": constant(15)}
    return CostConfig(efforts, trio_graph() if with_graph else None, discount)


def trio_model(space: FeatureSpace) -> ModelSpec:
    # accept iff Job=Developer and Edu>=BSc and Loc=US
    w = np.zeros(Encoding(space).width)
    w[1] = 10.0   # Developer
    w[3] = 10.0   # BSc
    w[4] = 10.0   # MSc
    w[6] = 10.0   # US
    return ModelSpec.linear(w, -25.0)


def trio_problem(discount=True, with_graph=True) -> Problem:
    space = trio_space()
    return Problem(space, trio_catalog(), trio_cost(discount, with_graph),
                   BlackBox(space, trio_model(space)), TRIO_X0)


def trio_doc(**brkga) -> dict:
    space = trio_space()
    return {
        "schema": "cscf.problem/1",
        "features": space.to_dict(),
        "actions": [
            {"id": "a1", "feature": "Job", "values": {"kind": "levels", "values": ["Developer"]}},
            {"id": "a2", "feature": "Edu", "values": {"kind": "levels", "values": ["BSc"]}},
            {"id": "a3", "feature": "Loc", "values": {"kind": "levels", "values": ["US"]}},
        ],
        "consequence_graph": {"edges": [
            {"source": "Loc", "target": "Edu", "tau": {"kind": "level_map", "map": {"US": 1.0}, "default": 0.5}},
            {"source": "Loc", "target": "Job", "tau": {"kind": "level_map", "map": {"US": 0.5}, "default": 1.0}},
            {"source": "Edu", "target": "Job",
             "tau": {"kind": "threshold_step", "op": ">=", "threshold": "BSc", "then": 0.5, "else": 1.0}},
        ]},
        "efforts": {"a1": {"kind": "constant", "value": 10},
                    "a2": {"kind": "constant", "value": 5},
                    "a3": {"kind": "constant", "value": 15}},
        "cost": {"discount_enabled": True},
        "classifier": {"model": model_to_dict(trio_model(space), space)},
        "brkga": {"population_size": 60, "generations": 30, **brkga},
        "seed": 0,
        "instances": [{"id": "p0", "values": {"Job": "Seller", "Edu": "HS", "Loc": "Germany"}}],
    }


# --------------------------------------------------------------------------
# five-feature person example

PERSON_X0 = (19.0, "Seller", "HS", 40.0, "Germany")


def person_space() -> FeatureSpace:
    return FeatureSpace([
        FeatureDef.numeric("Age", 17, 90),
        FeatureDef.categorical("Job", ["Seller", "Developer"]),
        FeatureDef.ordered("Edu", ["HS", "BSc", "MSc"]),
        FeatureDef.numeric("WorkHrs", 0, 99),
        FeatureDef.categorical("Loc", ["Germany", "US"]),
    ])


def person_catalog(space: FeatureSpace) -> list[Action]:
    age_ok = Constraint("pre", parse_predicate(
        {"op": ">=", "left": {"feature": "Age"}, "right": {"const": 18}}, space, 2))
    return [
        Action("decHrs", 3, numeric_monotone("decrease", 0, 99)),
        Action("addEdu", 2, monotone_levels("increase"),
               indirect_rules=(EffectRule(0, "add_constant", 4.0),), constraints=(age_ok,)),
        Action("chLoc", 4, level_subset(["US"])),
        Action("chJob", 1, level_subset(["Developer"])),
        Action("incHrs", 3, numeric_monotone("increase", 0, 99)),
    ]


PERSON_SEQUENCE = (("decHrs", 10.0), ("addEdu", "BSc"), ("chLoc", "US"), ("chJob", "Developer"), ("incHrs", 40.0))


# --------------------------------------------------------------------------
# randomized desk-scale problems with grid-valued actions


@functools.lru_cache(maxsize=None)
def random_problem(seed: int) -> Problem:
    """Five features, four grid-valued actions, a consequence graph and a
    random logistic black-box; x0 is rejected and some sequence is feasible."""
    rng = np.random.default_rng(seed)
    from cscf.oracle import enumerate_front

    while True:
        space = FeatureSpace([
            FeatureDef.numeric("Income", 0, 100),
            FeatureDef.ordered("Edu", ["L0", "L1", "L2", "L3"]),
            FeatureDef.numeric("Hours", 0, 80),
            FeatureDef.categorical("Sector", ["A", "B", "C"]),
            FeatureDef.numeric("Age", 18, 80),
        ])
        x0 = (float(rng.integers(10, 40)), "L0", float(rng.integers(30, 60)), "A", float(rng.integers(20, 40)))
        inc = sorted(rng.choice(np.arange(45, 100, 5), size=3, replace=False).astype(float).tolist())
        hrs = sorted(rng.choice(np.arange(0, 80, 5), size=3, replace=False).astype(float).tolist())
        edu_levels = ["L1", "L2", "L3"][: int(rng.integers(2, 4))]
        sectors = ["B", "C"]
        catalog = [
            Action("raiseIncome", 0, grid(inc, "increase")),
            Action("study", 1, grid(edu_levels, "increase"),
                   indirect_rules=(EffectRule(4, "add_scaled", float(rng.integers(1, 4))),)),
            Action("setHours", 2, grid(hrs)),
            Action("switchSector", 3, grid(sectors),
                   constraints=(Constraint("pre", parse_predicate(
                       {"op": ">=", "left": {"feature": "Edu"}, "right": {"const": "L1"}}, space, 3)),)),
        ]
        graph = ConsequenceGraph([
            (1, 0, threshold_step(1, ">=", "L2", float(rng.choice([0.4, 0.5, 0.6])), 1.0)),
            (2, 1, threshold_step(2, "<=", 30.0, float(rng.choice([0.5, 0.7])), 1.0)),
            (1, 3, level_map(1, {"L3": 0.5}, default=1.0)),
        ])
        efforts = {
            "raiseIncome": per_unit(float(rng.choice([0.2, 0.3, 0.5]))),
            "study": per_unit(float(rng.integers(3, 8))),
            "setHours": per_unit(float(rng.choice([0.1, 0.2]))),
            "switchSector": constant(float(rng.integers(4, 12))),
        }
        enc = Encoding(space)
        w = rng.normal(0, 1, enc.width)
        w[0] = abs(w[0]) + 2.0
        w[1:5] = np.sort(rng.normal(0, 1.5, 4))
        model = ModelSpec.linear(w, 0.0)
        # place the decision boundary so x0 is rejected but the best
        # reachable state is accepted
        logit0 = float(model.logit(enc.encode(x0)))
        logit_best = max(float(model.logit(enc.encode((100.0, edu_levels[-1], h, s, x0[4] + 3 * k))))
                         for h in (0.0, 80.0) for s in sectors for k in range(4))
        if logit_best - logit0 < 1.0:
            continue
        bias = -(logit0 + float(rng.uniform(0.35, 0.75)) * (logit_best - logit0))
        model = ModelSpec.linear(w, bias)
        bb = BlackBox(space, model)
        cost = CostConfig(efforts, graph, True)
        problem = Problem(space, catalog, cost, bb, x0)
        if bb.accepts(x0):
            continue
        front, _ = enumerate_front(problem)
        if len(front):
            return problem


def problem_doc(problem: Problem, params=None, instance_id: str = "x0") -> dict:
    """Serialize a :class:`Problem` as a problem-file document."""
    from cscf.brkga import BrkgaParams
    from cscf.problem import ProblemDefinition, problem_to_dict

    defn = ProblemDefinition(problem.space, list(problem.catalog), problem.cost, problem.blackbox.model,
                             params or BrkgaParams(), [(instance_id, problem.x0)])
    return problem_to_dict(defn)
