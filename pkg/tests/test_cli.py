import subprocess
import sys
import warnings

import numpy as np
import pytest
import yaml

from l1pca.cli import TRACE_HEADER, main

S = 1 / np.sqrt(2)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def run(argv, tmp_path, name="report.yaml"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (yaml.safe_load(out.read_text()) if out.exists() else None)


def test_fit_fig2(tmp_path):
    trace = tmp_path / "trace.csv"
    code, rep = run(["fit", "--generate", "fig2", "--k", "1", "--restarts", "100", "--seed", "7",
                     "--trace", str(trace)], tmp_path)
    assert code == 0
    a = np.array(rep["best"]["basis"])[:, 0]
    assert min(np.linalg.norm(a - [S, 0, S]), np.linalg.norm(a + [S, 0, S])) < 1e-3
    assert rep["best"]["orthonormality_defect"] < 1e-10
    assert rep["best"]["E"] == min(r["E"] for r in rep["restarts"])
    assert len(rep["restarts"]) == 101
    assert rep["config"]["tol_grad"] == 1e-8
    lines = trace.read_text().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER) == "r,E,step_norm,grad_norm,min_residual,C1_ratio"
    assert len(lines) == rep["best"]["iterations"] + 1


def test_fit_counterexample_two_minimizers(tmp_path):
    code, rep = run(["fit", "--generate", "counterexample", "--k", "1", "--restarts", "20",
                     "--seed", "1"], tmp_path)
    assert code == 0
    best = [s for s in rep["distinct_solutions"] if abs(s["E"] - rep["best"]["E"]) <= 1e-8]
    assert len(best) >= 2


def test_fit_report_deterministic(tmp_path):
    argv = ["fit", "--generate", "fig1", "--k", "1", "--restarts", "5", "--seed", "3"]
    main(argv + ["--out", str(tmp_path / "a.yaml")])
    main(argv + ["--out", str(tmp_path / "b.yaml"), "--jobs", "4"])
    assert (tmp_path / "a.yaml").read_bytes() == (tmp_path / "b.yaml").read_bytes()


def test_fit_missing_input(tmp_path, capsys):
    code, rep = run(["fit", "--input", str(tmp_path / "missing.csv"), "--k", "1"], tmp_path)
    assert code == 2
    assert rep is None
    assert "missing.csv" in capsys.readouterr().err


def test_fit_parse_error_no_partial_output(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    trace = tmp_path / "t.csv"
    code, rep = run(["fit", "--input", str(bad), "--k", "1", "--trace", str(trace)], tmp_path)
    assert code == 2 and rep is None and not trace.exists()
    assert "line 2" in capsys.readouterr().err


def test_fit_degenerate_data_exit_3(tmp_path):
    csv = tmp_path / "line.csv"
    csv.write_text("0,0\n1,1\n2,2\n")
    code, rep = run(["fit", "--input", str(csv), "--k", "2"], tmp_path)
    assert code == 3 and rep is None


def test_fit_csv_input_uses_mean(tmp_path):
    csv = tmp_path / "pts.csv"
    csv.write_text("x,y\n1,1\n2,2.1\n3,2.9\n4,4\n")
    code, rep = run(["fit", "--input", str(csv), "--k", "1"], tmp_path)
    assert code == 0
    assert rep["dataset"]["centering"] == "mean"
    np.testing.assert_allclose(rep["dataset"]["offset"], [2.5, 2.5])


def _basis(tmp_path, rows):
    p = tmp_path / "basis.csv"
    p.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    return str(p)


def test_certify_fig3_strict(tmp_path):
    code, rep = run(["certify", "--generate", "fig3", "--subspace", _basis(tmp_path, [[1], [0]])], tmp_path)
    assert code == 0
    assert rep["verdict"] == "strict_local_min"
    assert rep["anchor_set"] == [0]


def test_certify_remark_not_minimizer(tmp_path):
    code, rep = run(["certify", "--generate", "remark", "--subspace", _basis(tmp_path, [[1], [0]])], tmp_path)
    assert code == 0
    assert rep["verdict"] == "not_minimizer"
    ar = rep["anchor_report"]
    assert ar["descent_derivative"] == pytest.approx(-2 + np.sqrt(2), abs=1e-10)
    assert np.array(ar["descent_direction"]).shape == (2, 1)


def test_certify_non_anchor(tmp_path):
    code, rep = run(["certify", "--generate", "fig3", "--subspace", _basis(tmp_path, [[0.6], [0.8]])], tmp_path)
    assert code == 0
    assert rep["anchor_set"] == []
    assert rep["critical_point_test"]["passed"] is False


def test_certify_rank_deficient_exit_4(tmp_path):
    code, rep = run(["certify", "--generate", "fig3", "--subspace", _basis(tmp_path, [[1, 1], [0, 0]])], tmp_path)
    assert code == 4 and rep is None


def test_compare_fig1(tmp_path):
    code, rep = run(["compare", "--generate", "fig1", "--k", "1"], tmp_path)
    assert code == 0
    assert rep["robust"]["angle_to_truth_deg"] < rep["standard_pca"]["angle_to_truth_deg"]


def test_compare_fig2_nestedness(tmp_path):
    code, rep = run(["compare", "--generate", "fig2", "--k", "1", "--nested-k", "2",
                     "--restarts", "100", "--seed", "7"], tmp_path)
    assert code == 0
    assert rep["nestedness"]["residual"] == pytest.approx(S, abs=1e-3)
    assert rep["nestedness"]["violated"] is True


def test_compare_collinear_agree(tmp_path):
    csv = tmp_path / "line.csv"
    t = np.linspace(-2, 3, 11)
    csv.write_text("\n".join(f"{v},{2 * v + 1}" for v in t) + "\n")
    code, rep = run(["compare", "--input", str(csv), "--k", "1"], tmp_path)
    assert code == 0
    assert rep["grassmann_distance"] <= 1e-6


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["fit", "--k", "1"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "l1pca", "fit", "--generate", "fig3", "--k", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert yaml.safe_load(proc.stdout)["best"]["E"] == pytest.approx(1.0)
