import pytest
from hypothesis import given, strategies as st

from cscf.actions import Action, Sequence, level_subset
from cscf.consequence import CostConfig, constant
from cscf.feature_space import FeatureDef, FeatureSpace
from cscf.objectives import Problem, evaluate, gower, tweak_frequencies
from fixtures import PERSON_SEQUENCE, person_catalog, person_space, trio_problem

S2 = (("a2", "BSc"), ("a3", "US"), ("a1", "Developer"))


def test_gower_identity():
    space = person_space()
    x = (30.0, "Seller", "BSc", 20.0, "US")
    assert gower(space, x, x) == 0.0


def test_gower_all_categorical_mismatch():
    space = FeatureSpace([FeatureDef.categorical("a", ["x", "y"]), FeatureDef.categorical("b", ["p", "q"])])
    assert gower(space, ("x", "p"), ("y", "q")) == 1.0


def test_gower_mixed_hand_value():
    space = FeatureSpace([FeatureDef.numeric("Age", 0, 100), FeatureDef.categorical("Loc", ["DE", "US"])])
    assert gower(space, (20.0, "DE"), (70.0, "DE")) == 0.25


def test_gower_ordered_uses_level_distance():
    space = FeatureSpace([FeatureDef.ordered("Edu", ["HS", "BSc", "MSc"])])
    assert gower(space, ("HS",), ("BSc",)) == 0.5


def test_person_frequencies():
    space = person_space()
    assert tweak_frequencies(person_catalog(space), Sequence(PERSON_SEQUENCE), 5) == (1, 1, 1, 2, 1)


def test_single_action_unit_vector():
    space = person_space()
    assert tweak_frequencies(person_catalog(space), Sequence((("chLoc", "US"),)), 5) == (0, 0, 0, 0, 1)


def test_frequencies_add_up():
    space = person_space()
    seq = Sequence((("decHrs", 10.0), ("incHrs", 50.0)))
    assert tweak_frequencies(person_catalog(space), seq, 5)[3] == 2


def test_trio_s2_is_feasible():
    sol = evaluate(trio_problem(), Sequence(S2))
    assert sol.objectives[0] == 22.5
    assert sol.feasible
    assert sol.cost_undiscounted == 30.0
    assert sol.frequencies == (1, 1, 1)
    assert sol.distance == pytest.approx((1 + 0.5 + 1) / 3)


def test_partial_sequence_rejected():
    sol = evaluate(trio_problem(), Sequence((("a2", "BSc"),)))
    assert not sol.feasible
    assert sol.violation_count == 0
    assert sol.p_accept < 0.5


def test_empty_sequence_counts_a_violation():
    sol = evaluate(trio_problem(), Sequence(()))
    assert sol.violation_count == 1
    assert not sol.feasible
    assert sol.objectives == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_problem_validates_x0():
    p = trio_problem()
    with pytest.raises(ValueError):
        p.with_x0(("Pilot", "HS", "Germany"))


def test_problem_requires_efforts():
    p = trio_problem()
    with pytest.raises(ValueError):
        p.with_cost(CostConfig({"a1": constant(1)}))


def test_extra_action_without_effort_rejected():
    p = trio_problem()
    with pytest.raises(ValueError):
        Problem(p.space, (*p.catalog, Action("a4", 0, level_subset(["Seller"]))), p.cost, p.blackbox, p.x0)


_levels = ["HS", "BSc", "MSc"]
_inst = st.tuples(st.floats(17, 90), st.sampled_from(["Seller", "Developer"]), st.sampled_from(_levels),
                  st.floats(0, 99), st.sampled_from(["Germany", "US"]))


@given(_inst, _inst)
def test_gower_symmetric_and_bounded(a, b):
    space = person_space()
    d = gower(space, a, b)
    assert d == gower(space, b, a)
    assert 0.0 <= d <= 1.0
