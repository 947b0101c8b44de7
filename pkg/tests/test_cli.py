import json

import numpy as np
import pytest

from holoqc.cli import main
from holoqc.models import abelian_demo, builtin_two_qubit


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


def test_algebra_default(capsys):
    code, data = run_json(capsys, "algebra")
    assert code == 0
    assert data["schema"] == 1
    assert data["dim"] == 7 and data["ideal_dims"] == [3, 3]
    assert data["center_identity_residual"] <= 1e-8
    assert not data["irreducible"]
    assert len(data["basis"]) == 7
    assert np.array(data["basis"]).shape == (7, 4, 4, 2)


def test_algebra_text(capsys):
    code, out, _ = run(capsys, "algebra")
    assert code == 0
    assert "dim 7" in out and "ideals [3, 3]" in out


def test_algebra_curvature_only(capsys):
    code, data = run_json(capsys, "algebra", "--depth", "0")
    assert code == 2
    assert (data["dim"], data["center_dim"], data["derived_dim"]) == (4, 1, 3)


def test_algebra_depth_cap_exit(capsys):
    code, data = run_json(capsys, "algebra", "--depth", "1")
    assert code == 2
    assert not data["stabilized"]


def test_algebra_flat_point(capsys):
    code, out, _ = run(capsys, "algebra", "--point", "0,0,0,0")
    assert code == 0
    assert "dim 0" in out
    assert "warning: curvature vanishes at base point" in out


def test_bad_inputs(capsys):
    code, _, err = run(capsys, "algebra", "--point", "0.1,x")
    assert code == 1 and "error" in err
    code, _, _ = run(capsys, "algebra", "--point", "0.1,0.2")
    assert code == 1
    code, _, _ = run(capsys, "algebra", "--model", "nope")
    assert code == 1
    code, _, _ = run(capsys, "nope")
    assert code == 1


def test_curvature(capsys):
    code, data = run_json(capsys, "curvature", "--point", "0.5,0.3,0.2,0.1")
    assert code == 0
    comp = next(c for c in data["components"] if (c["i"], c["j"]) == ("r2", "theta2"))
    F = np.array(comp["matrix"])
    F = F[..., 0] + 1j * F[..., 1]
    assert np.allclose(F, 2j * np.sinh(1.0) * np.diag([0, 1, 1, 2]), atol=1e-9)


def test_transport_rect(capsys):
    code, data = run_json(capsys, "transport", "--rect", "r2,theta2,0.1")
    assert code == 0
    assert data["unitarity_drift"] <= 1e-8
    assert data["membership_residual"] <= 1e-6
    assert data["algebra_dim"] == 7
    code, data2 = run_json(capsys, "transport", "--rect", "0,1,0.1")
    assert data2["gamma"] == data["gamma"]


def test_transport_needs_loop(capsys):
    code, _, err = run(capsys, "transport")
    assert code == 1 and "--loop" in err
    code, _, _ = run(capsys, "transport", "--rect", "r2,r2,0.1")
    assert code == 1


def test_transport_loop_file(tmp_path, capsys):
    path = tmp_path / "loop.json"
    path.write_text(json.dumps({
        "closed": True,
        "segments": [
            {"type": "line", "from": [0, 0], "to": [1, 0]},
            {"type": "line", "from": [1, 0], "to": [1, 1]},
            {"type": "line", "from": [1, 1], "to": [0, 1]},
            {"type": "line", "from": [0, 1], "to": [0, 0]},
        ]
    }))
    code, data = run_json(capsys, "transport", "--model", "abelian-demo", "--loop", str(path))
    assert code == 0
    g = complex(*data["gamma"][0][0])
    assert abs(g - np.exp(-1j)) <= 1e-6


def test_model_file(tmp_path, capsys):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(builtin_two_qubit().to_json()))
    code, data = run_json(capsys, "algebra", "--model-file", str(path))
    assert code == 0 and data["dim"] == 7
    path.write_text(json.dumps(abelian_demo().to_json()))
    code, data = run_json(capsys, "algebra", "--model-file", str(path), "--point", "0.1,0.2")
    assert code == 0 and data["dim"] == 1
    code, _, err = run(capsys, "algebra", "--model-file", str(tmp_path / "missing.json"))
    assert code == 1


def test_seed_determinism(capsys):
    _, a = run_json(capsys, "algebra", "--seed", "3")
    _, b = run_json(capsys, "algebra", "--seed", "3")
    assert a == b


def test_verify_paper(capsys):
    code, data = run_json(capsys, "verify-paper")
    assert code == 0
    assert data["schema"] == 1
    assert all(r["passed"] for r in data["rows"])
    code, out, _ = run(capsys, "verify-paper")
    assert "PASS" in out and "FAIL" not in out


def test_fock_compare(capsys):
    code, data = run_json(capsys, "fock-compare")
    assert code == 0
    assert len(data["rows"]) == 4
    for row in data["rows"]:
        assert set(row) >= {"param_point", "coefficient", "max_abs_dev", "cutoff"}
        assert row["max_abs_dev"] <= 1e-3
    # too small a cutoff for strong squeezing is an input error
    code, _, err = run(capsys, "fock-compare", "--point", "0.8,0.5,0.6,0.4")
    assert code == 1 and "raise the cutoff" in err


@pytest.mark.slow
def test_verify_paper_with_fock(capsys):
    code, data = run_json(capsys, "verify-paper", "--fock")
    assert code == 0
    names = [r["name"] for r in data["rows"]]
    assert "Fock oracle algebra structure" in names
