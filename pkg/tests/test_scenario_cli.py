import json

import numpy as np
import pytest

from monofock.cli import main
from monofock.errors import MixedB, NonState, ScenarioError
from monofock.scenario import BUNDLED, bundled_path, load_scenario
from monofock.words import Letter, Word, matrix_from_json, matrix_to_json, word_to_json

A = np.array([[1.0, 2.0], [0.5j, -1.0]])
B = np.array([[0.0, 1.0 - 1j], [2.0, 3.0]])
RHO1 = np.array([[0.7, 0.1], [0.1, 0.3]])
RHO2 = np.array([[0.4, 0.2j], [-0.2j, 0.6]])


def two_index_scenario():
    return {"name": "pair", "B": {"kind": "scalar"},
            "algebras": [{"index": 1, "basis": {"kind": "full", "dim": 2}, "psi": {"density": matrix_to_json(RHO1)}},
                         {"index": 2, "basis": {"kind": "full", "dim": 2}, "psi": {"density": matrix_to_json(RHO2)}}]}


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_bundled_scenarios_load():
    for name in BUNDLED:
        sc = load_scenario(name)
        assert sc.family.indices == (1, 2, 3)
        assert bundled_path(name).exists()


def test_bundled_default_states_are_full_rank(scalar_scenario):
    for m in scalar_scenario.family:
        assert m.phi.is_faithful()


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError):
        bundled_path("nope")


def test_missing_keys():
    with pytest.raises(ScenarioError):
        load_scenario({"B": {"kind": "scalar"}})


def test_duplicate_index():
    d = two_index_scenario()
    d["algebras"][1]["index"] = 1
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_non_psd_density():
    d = two_index_scenario()
    d["algebras"][0]["psi"]["density"] = matrix_to_json(np.diag([1.5, -0.5]))
    with pytest.raises(NonState):
        load_scenario(d)


def test_density_needs_scalar_b():
    d = two_index_scenario()
    d["B"] = {"kind": "diagonal", "dim": 2}
    with pytest.raises(MixedB):
        load_scenario(d)


def test_thetas_must_reference_known_indices():
    d = two_index_scenario()
    d["thetas"] = {"7": {"kind": "identity"}}
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_non_unital_theta_is_rejected():
    d = two_index_scenario()
    k = matrix_to_json(np.array([[1.0, 0], [0, 0]]))
    d["thetas"] = {"1": {"kraus": [k]}, "2": {"kind": "identity"}}
    with pytest.raises(ScenarioError):
        load_scenario(d)


def test_tolerance_overrides():
    d = two_index_scenario()
    d["tolerances"] = {"eq": 1e-7}
    assert load_scenario(d).tolerances["eq"] == 1e-7


# command line ------------------------------------------------------------------


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_empty_word(capsys):
    code, out, _ = run(capsys, "eval", "--scenario", "scalar")
    assert code == 0
    assert matrix_from_json(json.loads(out)["value"])[0, 0] == 1


def test_eval_abab(capsys, tmp_path):
    sc = write(tmp_path, "pair.json", two_index_scenario())
    w = Word((Letter(1, A), Letter(2, B), Letter(1, A), Letter(2, B)))
    wp = write(tmp_path, "w.json", word_to_json(w))
    code, out, _ = run(capsys, "eval", "--rule", "monotone", "--scenario", sc, "--word", wp)
    assert code == 0
    got = matrix_from_json(json.loads(out)["value"])[0, 0]
    want = np.trace(RHO1 @ A @ A) * np.trace(RHO2 @ B) ** 2
    assert abs(got - want) < 1e-12


def test_eval_inline_word(capsys):
    w = json.dumps(word_to_json(Word((Letter(2, A),))))
    code, out, _ = run(capsys, "eval", "--rule", "map-product", "--scenario", "diagonal", "--word", w)
    assert code == 0


def test_eval_malformed_json(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "eval", "--scenario", str(p))
    assert code == 2 and "malformed" in err


def test_eval_unknown_index_is_an_evaluation_error(capsys):
    w = json.dumps(word_to_json(Word((Letter(9, A),))))
    code, _, err = run(capsys, "eval", "--scenario", "scalar", "--word", w)
    assert code == 1 and "UnknownIndex" in err


def test_eval_cmonotone_needs_phi(capsys):
    code, _, _ = run(capsys, "eval", "--rule", "cmonotone", "--scenario", "diagonal")
    assert code == 1


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["verify", "--suite", "nope"])
    assert e.value.code == 2


def test_verify_non_psd_scenario(capsys, tmp_path):
    d = two_index_scenario()
    d["algebras"][0]["psi"]["density"] = matrix_to_json(np.diag([1.5, -0.5]))
    code, _, err = run(capsys, "verify", "--suite", "moments", "--scenario", write(tmp_path, "s.json", d))
    assert code == 2 and "NonState" in err


def test_verify_cp_is_deterministic(capsys, tmp_path):
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    c1, o1, _ = run(capsys, "verify", "--suite", "cp", "--seed", "7", "--rounds", "10", "--json", str(r1))
    c2, o2, _ = run(capsys, "verify", "--suite", "cp", "--seed", "7", "--rounds", "10", "--json", str(r2))
    assert c1 == c2 == 0
    assert r1.read_bytes() == r2.read_bytes() and o1 == o2
    rep = json.loads(r1.read_text())
    assert rep["report_version"] == 1 and rep["summary"]["failed"] == 0
    assert all(c["anchor"] for c in rep["cases"])


def test_verify_moments_all_bundled(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "moments")
    assert code == 0
    assert "remark45/order-independence" in out


def test_verify_failure_exit_code(capsys):
    # an absurd tolerance makes every equality check fail
    code, out, _ = run(capsys, "verify", "--suite", "moments", "--scenario", "scalar", "--tol", "1e-30")
    assert code == 1 and "FAIL" in out


def test_demo(capsys):
    code, out, _ = run(capsys, "demo", "remark45")
    assert code == 0
    assert "6.7082039325" in out


def test_demo_refuses_non_centered(capsys, tmp_path):
    d = json.loads(bundled_path("remark45").read_text())
    d["counterexample"]["letters"][1]["element"] = matrix_to_json(np.eye(2) + np.diag([1.0, -1.0]))
    code, _, err = run(capsys, "demo", "remark45", "--scenario", write(tmp_path, "r.json", d))
    assert code == 2 and "DegenerateChoice" in err


def test_demo_degenerate_vector(capsys, tmp_path):
    d = json.loads(bundled_path("remark45").read_text())
    d["counterexample"]["letters"][1]["element"] = matrix_to_json(np.zeros((2, 2)))
    code, _, err = run(capsys, "demo", "remark45", "--scenario", write(tmp_path, "r.json", d))
    assert code == 2 and "DegenerateChoice" in err
