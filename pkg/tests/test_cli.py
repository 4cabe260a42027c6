import json
import subprocess
import sys

import numpy as np
import pytest

from halfplane_ma.cli import COMMANDS, load_schema, main
from halfplane_ma.closed_forms import DirichletFamily, sample_family
from halfplane_ma.core import EquationParams, FamilyCoeffs, GridSpec, ScalarField, ma_residual


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_every_command_has_a_schema():
    for c in COMMANDS:
        assert load_schema(c)["type"] == "object"


def test_family_csv(capsys):
    code, out, _ = run(["family", "--alpha", "1", "--a", "0", "--b", "1", "--A", "0", "--B", "0",
                        "--C", "0", "--grid", "-1,1,0,1,5,5"], capsys)
    assert code == 0
    f = ScalarField.from_csv(out)
    X, Y = f.spec.mesh()
    np.testing.assert_allclose(f.values, X * X / 2 + Y ** 3 / 6, rtol=1e-15, atol=1e-16)


def test_family_other_kinds(capsys):
    code, out, _ = run(["family", "--family", "neumann", "--alpha", "0", "--A", "2",
                        "--grid", "0,2,0,2,3,3", "--format", "json"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["values"][-1] == pytest.approx(5.0)
    code, out, _ = run(["family", "--family", "entire", "--alpha", "2", "--A", "1", "--B", "3",
                        "--grid", "-1,1,-1,1,3,3"], capsys)
    assert code == 0


def test_sharpness(capsys):
    code, out, _ = run(["sharpness", "--alpha", "-2.5", "--y", "1e-4"], capsys)
    assert code == 0
    assert json.loads(out)["bound"] == pytest.approx(133.33333333333334, rel=1e-15)
    code, out, _ = run(["sharpness", "--alpha", "-2", "--y", "1e-2", "1e-4"], capsys)
    assert json.loads(out)["bound"] == pytest.approx([4.605170185988091, 9.210340371976182])


def test_convergence_reference(capsys):
    code, out, _ = run(["convergence"], capsys)
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["n"] for r in rows] == [17, 33, 65]
    assert all(r["observed_order"] >= 1.9 for r in rows[1:])


def test_family_then_residual_round_trip(tmp_path, capsys):
    path = tmp_path / "u.csv"
    args = ["--alpha", "0.5", "--a", "1", "--b", "2", "--A", "0.3", "--B", "-1", "--C", "0.2"]
    assert main(["family", *args, "--grid", "-1,1,0,1,65,65", "--output", str(path)]) == 0
    code, out, _ = run(["residual", "--input", str(path), "--alpha", "0.5", "--a", "1",
                        "--b", "2"], capsys)
    assert code == 0
    rep = json.loads(out)
    fam = DirichletFamily(EquationParams(1, 2, 0.5), FamilyCoeffs(0.3, -1, 0.2))
    direct = ma_residual(sample_family(fam, GridSpec(-1, 1, 0, 1, 65, 65)), fam.params)
    assert rep["max_abs"] == direct.max_abs
    assert rep["n_evaluated"] == direct.n_evaluated


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"s{k}.csv"
        r = tmp_path / f"r{k}.json"
        assert main(["solve", "--alpha", "1", "--a", "0", "--b", "1", "--A", "0.5", "--C", "0.3",
                     "--grid", "-1,1,0,1,17,17", "--output", str(p), "--report", str(r)]) == 0
        outs.append((p.read_bytes(), r.read_bytes()))
    assert outs[0] == outs[1]
    assert json.loads(outs[0][1])["converged"] is True


def test_plt_and_summary(tmp_path, capsys):
    u = tmp_path / "u.csv"
    assert main(["family", "--alpha", "1", "--a", "0", "--b", "1", "--A", "0.5", "--C", "0.3",
                 "--grid", "-1,1,0,1,33,9", "--output", str(u)]) == 0
    star, summ = tmp_path / "s.csv", tmp_path / "s.json"
    assert main(["plt", "--input", str(u), "--output", str(star), "--summary", str(summ)]) == 0
    s = json.loads(summ.read_text())
    assert s["involution_error"] < 1e-6
    assert s["fenchel_young_min_gap"] > -1e-12
    assert ScalarField.from_csv(star.read_text()).spec.nx == 33
    code, _, err = run(["plt", "--input", str(u), "--output", str(star), "--no-refine",
                        "--method", "brute"], capsys)
    assert code == 0 and "involution_error" in err


def test_plt_nonconvex_is_input_error(tmp_path, capsys):
    f = ScalarField.sample(GridSpec(-1, 1, 0, 1, 9, 5), lambda x, y: -x * x + 0 * y)
    p = tmp_path / "bad.json"
    p.write_text(f.to_json())
    code, _, err = run(["plt", "--input", str(p)], capsys)
    assert code == 2 and "slice 0" in err


def test_divform(capsys):
    code, out, _ = run(["divform", "--alpha", "1", "--a", "1", "--b", "1", "--A", "0.5",
                        "--grid", "-1,1,0,2,9,129"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["c_star"] == pytest.approx(0.65518534855222415, rel=1e-8)
    assert d["profile_rel_error"] < 2e-2
    code, out, _ = run(["divform", "--alpha", "1", "--a", "1", "--b", "1", "--A", "0.5",
                        "--grid", "-1,1,0,2,9,33", "--format", "csv"], capsys)
    assert code == 0 and out.startswith("x,y,value")


def test_kelvin_check(tmp_path, capsys):
    cfg = tmp_path / "k.json"
    cfg.write_text(json.dumps({"center": [0.0, 0.0], "lambda": 1.0, "a_w": 0.0,
                               "grid": [[-0.5, 0.5, 17], [1.0, 2.0, 17]],
                               "samples": [[0.3, 2.0], [1.0, 0.0]], "tol": 5e-2}))
    code, out, _ = run(["kelvin-check", "--config", str(cfg)], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["log_variant"] is True
    assert d["violations"] == []
    assert d["residual"]["max_abs"] < 5e-2
    code, out, _ = run(["kelvin-check", "--config", str(cfg), "--tol", "1e-9"], capsys)
    assert len(json.loads(out)["violations"]) > 0


def test_ms_check(tmp_path, capsys):
    code, out, _ = run(["ms-check", "--center", "0,0", "--lambda", "1", "--function", "height",
                        "--grid", "-2,2,21;0,2,11"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["violations"] == [] and d["n_checked"] + d["n_skipped"] == 231
    # f = -y_n: the image is lower, so the comparison fails off the sphere and the axis
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"center": [0, 0], "lambda": 1,
                               "function": {"kind": "linear", "coeffs": [0, 0, -1]},
                               "samples": [[0.0, 2.0], [3.0, 0.0], [1.0, 0.0]]}))
    code, out, _ = run(["ms-check", "--config", str(cfg)], capsys)
    assert code == 0
    assert [v["index"] for v in json.loads(out)["violations"]] == [0]


def test_ms_check_sample_inside_ball(tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"center": [0, 0], "lambda": 1, "function": {"kind": "constant"},
                               "samples": [[0.1, 0.1]]}))
    code, _, err = run(["ms-check", "--config", str(cfg)], capsys)
    assert code == 2 and "inside" in err


def test_solve_not_converged_exit_3(tmp_path, capsys):
    code, _, err = run(["solve", "--alpha", "1", "--a", "0", "--b", "1", "--A", "0.5",
                        "--grid", "-1,1,0,1,9,9", "--newton-tol", "1e-300", "--max-iters", "2",
                        "--output", str(tmp_path / "s.csv")], capsys)
    assert code == 3
    assert "did not converge" in err
    assert (tmp_path / "s.csv").exists()


def test_solver_error_exit_3(monkeypatch, capsys):
    from halfplane_ma import cli
    from halfplane_ma.solver import SolverError

    def boom(cfg):
        raise SolverError("singular Newton system at iteration 1")
    monkeypatch.setattr(cli, "solve_dirichlet", boom)
    code, _, err = run(["solve", "--alpha", "1", "--a", "0", "--b", "1",
                        "--grid", "-1,1,0,1,5,5"], capsys)
    assert code == 3 and "iteration 1" in err


def test_validation_errors(capsys):
    code, _, err = run(["family", "--alpha", "1", "--grid", "-1,1,0,1,2,3"], capsys)
    assert code == 2 and "grid.nx" in err
    code, _, err = run(["solve", "--alpha", "1", "--a", "-1", "--b", "1",
                        "--grid", "-1,1,0,1,5,5"], capsys)
    assert code == 2 and "'a'" in err
    code, _, err = run(["sharpness", "--alpha", "-1", "--y", "1"], capsys)
    assert code == 2 and "alpha" in err
    code, _, err = run(["residual", "--input", "/nonexistent.csv", "--alpha", "1", "--a", "0",
                        "--b", "1"], capsys)
    assert code == 2
    code, _, err = run(["sharpness", "--alpha", "-3", "--y", "1", "--format", "csv"], capsys)
    assert code == 2


def test_unknown_command(capsys):
    code, _, err = run(["bogus"], capsys)
    assert code == 2 and "usage" in err


def test_config_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "f.json"
    cfg.write_text(json.dumps({"family": "dirichlet", "alpha": 0, "a": 1, "b": 1,
                               "grid": {"x_min": 0, "x_max": 1, "y_min": 0, "y_max": 1,
                                        "nx": 3, "ny": 3}}))
    code, out, _ = run(["family", "--config", str(cfg), "--grid", "0,2,0,1,3,3"], capsys)
    assert code == 0
    assert ScalarField.from_csv(out).spec.x_max == 2.0
    cfg.write_text(json.dumps({"family": "dirichlet", "alpha": 0, "bogus": 1}))
    code, _, err = run(["family", "--config", str(cfg)], capsys)
    assert code == 2


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "halfplane_ma.cli", "sharpness", "--alpha",
                          "-2.5", "--y", "1e-4"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["bound"] == pytest.approx(133.333333333333)
