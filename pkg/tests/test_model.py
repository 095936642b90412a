import json
import math

import numpy as np
import pytest
from conftest import fixture_file, make_model, stump
from gen import random_case, to_model
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import margin as oracle_margin

from shapnarr.errors import ModelParseError, ModelValidationError, UnsupportedOperationError, ModelError
from shapnarr.model import (
    TreeEnsemble,
    dump_model,
    load_model,
    predict_margin,
    predict_margin_batch,
    predict_probability,
    sigmoid,
    to_array,
)

META2 = {"base_score": 0.0, "feature_names": ["a", "b"], "objective": "binary_logistic"}


def test_single_leaf_is_constant():
    model = make_model([{"nodeid": 0, "leaf": 0.7}], ["a", "b"])
    assert len(model.trees) == 1
    assert predict_margin(model, [3.0, None]) == 0.7
    assert predict_margin(model, [None, None]) == 0.7


def test_empty_ensemble_is_base_score():
    model = make_model([], ["a"], base=-0.25)
    assert predict_margin(model, [1.0]) == -0.25


def test_two_stumps_manual_traversal():
    # x0<0.5 ? -1 : +1   and   x1<0.5 ? 0.5 : -0.5 ;  x=(1,0) -> +1 + 0.5
    model = make_model([stump("a", 0.5, -1.0, 1.0), stump("b", 0.5, 0.5, -0.5)], ["a", "b"])
    assert predict_margin(model, [1.0, 0.0]) == 1.5


def test_split_is_strict_less_than():
    model = make_model([stump("a", 0.5, 1.0, 3.0)], ["a"])
    assert predict_margin(model, [0.4999]) == 1.0
    assert predict_margin(model, [0.5]) == 3.0


def test_missing_routes_to_missing_child():
    model = make_model([stump("a", 0.5, 1.0, 3.0, missing="yes")], ["a"])
    assert predict_margin(model, [None]) == 1.0
    model = make_model([stump("a", 0.5, 1.0, 3.0, missing="no")], ["a"])
    assert predict_margin(model, [None]) == 3.0
    assert predict_margin(model, [float("nan")]) == 3.0


def test_feature_alias_fn_resolves_by_index():
    model = make_model([stump("f1", 0.5, 1.0, 3.0)], ["a", "b"])
    assert model.trees[0].nodes[0].feature_index == 1


def test_probability():
    m0 = make_model([], ["a"], base=0.0)
    assert predict_probability(m0, [0.0]) == 0.5
    m = make_model([], ["a"], base=1.5)
    # 1 / (1 + e^-1.5)
    assert predict_probability(m, [0.0]) == pytest.approx(0.817574, abs=1e-6)
    mneg = make_model([], ["a"], base=-1.5)
    assert predict_probability(mneg, [0.0]) == pytest.approx(1 - predict_probability(m, [0.0]), abs=1e-15)


def test_sigmoid_stable_at_extremes():
    assert sigmoid(500.0) == 1.0
    assert 0.0 <= sigmoid(-500.0) < 1e-200
    assert not math.isnan(sigmoid(-800.0))


def test_probability_refused_for_regression():
    model = make_model([], ["a"], objective="regression")
    with pytest.raises(UnsupportedOperationError):
        predict_probability(model, [0.0])


def test_length_mismatch():
    model = make_model([stump("a", 0.5, 1.0, 3.0)], ["a", "b"])
    with pytest.raises(ModelError):
        predict_margin(model, [1.0])


# --- parse errors -----------------------------------------------------------


def test_malformed_json_reports_byte_offset():
    bad = b'[{"nodeid": 0, "leaf": 0.5}'
    with pytest.raises(ModelParseError) as info:
        load_model(bad, json.dumps(META2).encode())
    assert info.value.offset == len(bad)
    assert f"byte {len(bad)}" in str(info.value)


def test_byte_offset_counts_utf8_bytes():
    text = '{"feature_names": ["é"], "base_score": 0, ' + "!"
    with pytest.raises(ModelParseError) as info:
        load_model(b"[]", text.encode())
    assert info.value.offset == len(text.encode()) - 1


def test_dangling_child_reference():
    tree = stump("a", 0.5, 1.0, 2.0)
    tree["no"] = 99
    with pytest.raises(ModelValidationError) as info:
        load_model(json.dumps([tree]), json.dumps(META2))
    assert info.value.tree_index == 0 and info.value.node_id == 0
    assert "99" in str(info.value)


def test_cycle_rejected():
    tree = {
        "nodeid": 0,
        "split": "a",
        "split_condition": 0.5,
        "yes": 1,
        "no": 2,
        "missing": 1,
        "children": [
            {"nodeid": 1, "split": "b", "split_condition": 0.5, "yes": 0, "no": 2, "missing": 0},
            {"nodeid": 2, "leaf": 1.0},
        ],
    }
    with pytest.raises(ModelValidationError, match="more than once"):
        load_model(json.dumps([tree]), json.dumps(META2))


def test_unreachable_node_rejected():
    tree = stump("a", 0.5, 1.0, 2.0)
    tree["children"].append({"nodeid": 7, "leaf": 0.0})
    with pytest.raises(ModelValidationError, match="unreachable") as info:
        load_model(json.dumps([tree]), json.dumps(META2))
    assert info.value.node_id == 7


def test_feature_out_of_range():
    with pytest.raises(ModelValidationError, match="out of range"):
        load_model(json.dumps([stump("f5", 0.5, 1.0, 2.0)]), json.dumps(META2))


def test_unknown_split_name():
    with pytest.raises(ModelValidationError, match="unknown split feature"):
        load_model(json.dumps([stump("zzz", 0.5, 1.0, 2.0)]), json.dumps(META2))


def test_missing_must_be_yes_or_no():
    tree = stump("a", 0.5, 1.0, 2.0)
    tree["children"].append({"nodeid": 3, "leaf": 0.0})
    tree["missing"] = 3
    with pytest.raises(ModelValidationError, match="missing branch"):
        load_model(json.dumps([tree]), json.dumps(META2))


def test_leaf_and_split_together_rejected():
    with pytest.raises(ModelValidationError, match="exactly one"):
        load_model(json.dumps([{"nodeid": 0, "leaf": 1.0, "split": "a"}]), json.dumps(META2))


def test_unknown_objective_rejected():
    meta = dict(META2, objective="multi:softprob")
    with pytest.raises(ModelValidationError, match="objective"):
        load_model(b"[]", json.dumps(meta))


def test_validation_error_names_tree_index():
    good = stump("a", 0.5, 1.0, 2.0)
    bad = stump("a", 0.5, 1.0, 2.0)
    bad["yes"] = 42
    with pytest.raises(ModelValidationError) as info:
        load_model(json.dumps([good, bad]), json.dumps(META2))
    assert info.value.tree_index == 1


def test_unknown_keys_ignored():
    tree = stump("a", 0.5, 1.0, 2.0)
    tree["gain"] = 12.5
    tree["cover"] = 100
    meta = dict(META2, extra="ignored")
    model = load_model(json.dumps([tree]), json.dumps(meta))
    assert predict_margin(model, [0.0, 0.0]) == 1.0


def test_accepts_file_objects(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps([{"nodeid": 0, "leaf": 0.7}]))
    with open(p, "rb") as fh:
        model = load_model(fh, json.dumps(META2).encode())
    assert predict_margin(model, [0.0, 0.0]) == 0.7


# --- Titanic fixture --------------------------------------------------------


def test_titanic_fixture_metadata(titanic_model):
    assert titanic_model.feature_names == ("Pclass", "Sex", "Age", "SibSp", "Parch", "Fare", "Embarked")
    assert titanic_model.objective == "binary_logistic"
    assert len(titanic_model.trees) == 60


def test_titanic_fixture_round_trip(titanic_model):
    dump, meta = dump_model(titanic_model)
    again = load_model(dump, meta)
    assert again == titanic_model


def test_titanic_fixture_matches_raw_dump(titanic_model, titanic_data):
    raw = json.loads(fixture_file("titanic_model.json").read_text())
    names = list(titanic_model.feature_names)
    for row in titanic_data.rows:
        assert predict_margin(titanic_model, row) == oracle_margin(raw, titanic_model.base_score, row, names)


# --- properties -------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_routing_total_and_batch_agrees(seed):
    dump, meta, x, background = random_case(seed)
    model = to_model(dump, meta)
    n = model.n_features
    rows = [x, tuple([None] * n)] + background
    scalar = np.array([predict_margin(model, r) for r in rows])
    batch = predict_margin_batch(model, to_array(rows))
    assert np.array_equal(scalar, batch)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_ensemble_additivity_exact(seed):
    dump, meta, x, _ = random_case(seed)
    model = to_model(dump, meta)
    total = model.base_score
    for tree in dump:
        single = to_model([tree], dict(meta, base_score=0.0))
        total += predict_margin(single, x)
    assert predict_margin(model, x) == total


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_parse_round_trip(seed):
    dump, meta, _, _ = random_case(seed)
    model = to_model(dump, meta)
    d, m = dump_model(model)
    assert load_model(d, m) == model


@given(st.floats(-500, 500), st.floats(-500, 500))
def test_sigmoid_monotone(a, b):
    if a < b:
        assert sigmoid(a) <= sigmoid(b)
        if b - a > 1e-6 and max(a, b) < 30:
            assert sigmoid(a) < sigmoid(b)


def test_ensemble_is_immutable(toy_model):
    with pytest.raises(AttributeError):
        toy_model.base_score = 3.0
    assert isinstance(toy_model, TreeEnsemble)
