"""scikit-learn style front end over :func:`cscf.brkga.evolve`."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .actions import validate_catalog
from .brkga import BrkgaParams, Front, evolve
from .classifier import BlackBox
from .consequence import CostConfig
from .feature_space import FeatureSpace, validate_instance
from .objectives import Problem


class SequentialCounterfactualSearch(BaseEstimator):
    """Search Pareto-optimal action sequences that flip a black-box decision.

    ``fit(X)`` runs one optimisation per row of ``X`` (each row an instance
    of ``space``) and stores the fronts in ``fronts_``. ``transform(X)``
    returns, per row, the final state of the cheapest solution found (None
    if the front is empty).

    Parameters
    ----------
    space, catalog, cost, blackbox
        The problem definition shared by every instance.
    population_size, mutant_fraction, offspring_fraction, crossover_bias,
    elite_capacity_fraction, generations, seed
        Optimizer settings, see :class:`cscf.brkga.BrkgaParams`.
    discount : bool
        If False, the consequence graph is ignored (cost = effort).
    """

    def __init__(self, space: FeatureSpace = None, catalog=None, cost: CostConfig = None,
                 blackbox: BlackBox = None, population_size=500, mutant_fraction=0.2,
                 offspring_fraction=0.8, crossover_bias=0.7, elite_capacity_fraction=0.2,
                 generations=150, seed=0, discount=True):
        self.space = space
        self.catalog = catalog
        self.cost = cost
        self.blackbox = blackbox
        self.population_size = population_size
        self.mutant_fraction = mutant_fraction
        self.offspring_fraction = offspring_fraction
        self.crossover_bias = crossover_bias
        self.elite_capacity_fraction = elite_capacity_fraction
        self.generations = generations
        self.seed = seed
        self.discount = discount

    def _params(self) -> BrkgaParams:
        return BrkgaParams(self.population_size, self.mutant_fraction, self.offspring_fraction,
                           self.crossover_bias, self.elite_capacity_fraction, self.generations, self.seed)

    def _validate(self):
        if self.space is None or not self.catalog or self.cost is None or self.blackbox is None:
            raise ValueError("space, catalog, cost and blackbox are required")
        validate_catalog(self.space, self.catalog)
        self.cost.check_catalog(self.catalog)

    def _rows(self, X):
        rows = [self.space.instance(list(x)) for x in X]
        for i, r in enumerate(rows):
            report = validate_instance(self.space, r)
            if not report.ok:
                raise ValueError(f"row {i}: {report.violations}")
        return rows

    def explain(self, x0) -> Front:
        """Optimise a single instance."""
        self._validate()
        cost = self.cost if self.discount else self.cost.without_discount()
        problem = Problem(self.space, self.catalog, cost, self.blackbox, self.space.instance(list(x0)))
        return evolve(problem, self._params())

    def fit(self, X, y=None):
        self._validate()
        self.fronts_ = [self.explain(x) for x in self._rows(X)]
        self.n_features_in_ = len(self.space)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "fronts_")
        fronts = self.fronts_ if X is None else [self.explain(x) for x in self._rows(X)]
        out = []
        for front in fronts:
            best = min(front.solutions, key=lambda s: s.objectives, default=None)
            out.append(None if best is None else best.final)
        return out

    def fit_transform(self, X, y=None):
        return self.fit(X).transform()
