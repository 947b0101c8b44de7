import copy
import json

import numpy as np
import pytest

from holoqc.expr import ExprSyntaxError
from holoqc.matcore import antihermitian_defect
from holoqc.models import (
    BUILTIN_NAMES,
    ModelError,
    abelian_demo,
    builtin_connection,
    builtin_two_qubit,
    load_model,
    two_qubit_json,
)


def test_two_qubit_shape():
    spec = builtin_two_qubit()
    assert spec.coordinates == ("r2", "theta2", "r3", "theta3")
    assert spec.n == 4 and spec.d == 4
    assert len(spec.curvature_ref) == 4
    assert "sqrt_swap" in spec.gates


def test_two_qubit_printed_examples():
    spec = builtin_two_qubit()
    A = spec.coefficient_array([0.0, 0.3, 0.7, 1.1])
    assert abs(abs(A[2][1, 2]) - 1) < 1e-15
    assert np.allclose(A[1], 0)
    base = spec.coefficient_array([0.4, 0.3, 0.7, 1.1])[0]
    for t3 in (-2.0, 0.0, 2.5):
        assert np.array_equal(spec.coefficient_array([0.4, 0.3, 0.7, t3])[0], base)


def test_antihermitian_everywhere():
    for name in ("two-qubit-optical", "abelian-demo"):
        _, spec = builtin_connection(name)
        for p in spec.sample_points(50, seed=9):
            for A in spec.coefficient_array(p):
                assert antihermitian_defect(A) < 1e-9


def test_batch_matches_pointwise():
    spec = builtin_two_qubit()
    P = spec.sample_points(7, seed=2)
    batch = spec.coefficient_batch(P)
    for k, p in enumerate(P):
        assert np.allclose(batch[k], spec.coefficient_array(p), atol=1e-15)


def test_file_round_trip(tmp_path):
    spec = builtin_two_qubit()
    path = tmp_path / "model.json"
    path.write_text(json.dumps(spec.to_json()))
    again = load_model(path)
    assert again.to_json() == spec.to_json()
    for p in spec.sample_points(50, seed=4):
        assert np.max(np.abs(again.coefficient_array(p) - spec.coefficient_array(p))) < 1e-12


def test_abelian_demo_loads_from_file(tmp_path):
    path = tmp_path / "abelian.json"
    path.write_text(json.dumps({
        "name": "abelian-demo", "fiber_dim": 1, "coordinates": ["x", "y"],
        "coefficients": {"x": [["0"]], "y": [["i*x"]]},
    }))
    spec = load_model(path)
    assert spec.coefficient_array([0.5, 0.0])[1, 0, 0] == 0.5j
    assert abelian_demo().to_json()["coefficients"] == spec.to_json()["coefficients"]


def _mutated(**changes):
    data = copy.deepcopy(two_qubit_json())
    for key, value in changes.items():
        data[key] = value
    return data


def test_syntax_error_carries_offset():
    data = _mutated()
    data["coefficients"]["r2"][0][3] = "r2 +"
    with pytest.raises(ModelError) as err:
        load_model(data)
    assert isinstance(err.value.__cause__, ExprSyntaxError)
    assert err.value.__cause__.offset == 4
    assert "offset 4" in str(err.value)


def test_schema_violations():
    with pytest.raises(ModelError):
        load_model({"name": "x"})
    with pytest.raises(ModelError):
        load_model(_mutated(fiber_dim=0))
    with pytest.raises(ModelError):
        load_model(_mutated(coordinates=["r2", "r2", "r3", "theta3"]))


def test_shape_and_binding_errors():
    data = _mutated()
    data["coefficients"]["r2"] = [["0", "0"], ["0", "0"]]
    with pytest.raises(ModelError, match="4x4|shape"):
        load_model(data)
    data = _mutated()
    data["coefficients"]["r2"][0][0] = "i*zeta"
    with pytest.raises(ModelError, match="zeta"):
        load_model(data)
    data = _mutated()
    del data["coefficients"]["theta3"]
    with pytest.raises(ModelError):
        load_model(data)


def test_antihermiticity_failure_reports_entry():
    data = _mutated()
    data["coefficients"]["r2"][0][3] = "exp(-i*theta2)"
    with pytest.raises(ModelError) as err:
        load_model(data)
    msg = str(err.value)
    assert "A_r2" in msg
    assert "[0][3]" in msg or "[3][0]" in msg


def test_invalid_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(bad)
    with pytest.raises(ModelError):
        load_model(tmp_path / "missing.json")


def test_registry():
    assert set(BUILTIN_NAMES) >= {"two-qubit-optical", "abelian-demo"}
    with pytest.raises(ModelError):
        builtin_connection("nope")
    conn, spec = builtin_connection("fock-single-qubit", cutoff=12)
    assert spec is None and conn.n == 2 and conn.d == 4
