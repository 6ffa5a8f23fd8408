import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cscf.classifier import (BlackBox, Encoding, Layer, LogisticRegressionGD, ModelError, ModelSpec,
                             fit_logistic, load_model, predict_accept_proba, save_model)
from cscf.feature_space import FeatureDef, FeatureSpace


@pytest.fixture
def space():
    return FeatureSpace([FeatureDef.numeric("Age", 17, 90), FeatureDef.categorical("Loc", ["Germany", "US"])])


def test_min_encodes_to_zero(space):
    assert Encoding(space).encode((17.0, "Germany"))[0] == 0.0


def test_one_hot_block(space):
    assert list(Encoding(space).encode((17.0, "US"))[1:]) == [0.0, 1.0]


def test_full_instance(space):
    assert list(Encoding(space).encode((90.0, "Germany"))) == [1.0, 1.0, 0.0]


def test_zero_model_is_half():
    assert predict_accept_proba(ModelSpec.linear([0.0, 0.0], 0.0), [1.0, 0.0]) == 0.5


def test_linear_forward():
    p = predict_accept_proba(ModelSpec.linear([2.0, -1.0], 0.0), [1.0, 0.0])
    assert p == pytest.approx(1 / (1 + np.exp(-2.0)), abs=1e-12)
    assert round(p, 4) == 0.8808


def test_identity_mlp_matches_linear():
    w1 = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    w2 = np.array([[0.5, -1.0, 1.0]])
    mlp = ModelSpec([Layer(w1, np.zeros(3)), Layer(w2, np.array([0.3]))])
    lin = ModelSpec.linear(w2 @ w1, 0.3)
    x = np.array([0.2, 0.7])
    assert predict_accept_proba(mlp, x) == pytest.approx(predict_accept_proba(lin, x), abs=1e-12)


def test_width_mismatch():
    with pytest.raises(ModelError):
        predict_accept_proba(ModelSpec.linear([1.0, 1.0], 0.0), [1.0, 0.0, 0.0])


def test_separable_fit():
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    model, acc = fit_logistic(X, [0, 1], steps=500, seed=0)
    assert acc == 1.0
    assert predict_accept_proba(model, X[1]) > 0.5 > predict_accept_proba(model, X[0])


def test_single_class_cannot_fit():
    with pytest.raises(ValueError, match="cannot fit"):
        fit_logistic(np.eye(2), [1, 1])


def test_fit_is_deterministic():
    rng = np.random.default_rng(3)
    X = rng.random((40, 3))
    y = (X[:, 0] > 0.5).astype(int)
    a, _ = fit_logistic(X, y, steps=200, seed=7)
    b, _ = fit_logistic(X, y, steps=200, seed=7)
    assert a.layers[0].weights.tobytes() == b.layers[0].weights.tobytes()
    assert a.layers[0].bias.tobytes() == b.layers[0].bias.tobytes()


def test_estimator_api():
    X = np.array([[0.0], [0.2], [0.8], [1.0]])
    est = LogisticRegressionGD(steps=300).fit(X, [0, 0, 1, 1])
    assert est.get_params()["steps"] == 300
    assert list(est.predict(X)) == [0, 0, 1, 1]
    assert est.predict_proba(X).shape == (4, 2)


def test_round_trip_predictions(space):
    rng = np.random.default_rng(0)
    model = ModelSpec([Layer(rng.normal(size=(4, 3)), rng.normal(size=4), "relu"),
                       Layer(rng.normal(size=(1, 4)), rng.normal(size=1), "identity")])
    back = load_model(save_model(model, space), space)
    X = rng.random((100, 3))
    assert np.array_equal(predict_accept_proba(model, X), predict_accept_proba(back, X))


def test_mismatched_layer_widths_named():
    doc = {"kind": "mlp", "layers": [
        {"rows": 2, "cols": 3, "weights": [0.0] * 6, "bias": [0.0, 0.0]},
        {"rows": 1, "cols": 4, "weights": [0.0] * 4, "bias": [0.0]}]}
    with pytest.raises(ModelError, match="layer 1"):
        load_model(json.dumps(doc))


def test_unknown_activation():
    doc = {"kind": "linear", "layers": [{"rows": 1, "cols": 2, "weights": [0.0, 0.0], "bias": [0.0],
                                         "activation": "swish"}]}
    with pytest.raises(ModelError, match="activation"):
        load_model(doc)


def test_fingerprint_mismatch(space):
    other = FeatureSpace([FeatureDef.numeric("Age", 0, 90), FeatureDef.categorical("Loc", ["Germany", "US"])])
    text = save_model(ModelSpec.linear([1.0, 0.0, 0.0], 0.0), space)
    with pytest.raises(ModelError, match="fingerprint"):
        load_model(text, other)


@given(st.lists(st.tuples(st.floats(17, 90), st.sampled_from(["Germany", "US"])), min_size=1, max_size=10))
def test_batch_equals_single(rows):
    space = FeatureSpace([FeatureDef.numeric("Age", 17, 90), FeatureDef.categorical("Loc", ["Germany", "US"])])
    bb = BlackBox(space, ModelSpec.linear([3.0, -1.0, 1.0], -1.0))
    batch = bb.proba_many(rows)
    for r, p in zip(rows, batch):
        assert bb.proba(r) == pytest.approx(float(p), abs=1e-15)
        assert 0.0 <= p <= 1.0
