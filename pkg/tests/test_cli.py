import json
import math

import numpy as np
import pytest

from regbounds.cli import main
from regbounds.data import Dataset, to_libsvm
from regbounds.report import to_csv, to_json
from regbounds.synthetic import regression_problem, two_gaussians


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "train.svm").write_text(to_libsvm(two_gaussians(60, 3, 2.0, seed=1)))
    (d / "val.svm").write_text(to_libsvm(two_gaussians(40, 3, 2.0, seed=2)))
    (d / "new.svm").write_text(to_libsvm(two_gaussians(3, 3, 2.0, seed=3)))
    X, y = regression_problem(30, 10, seed=4)
    (d / "reg.svm").write_text(to_libsvm(Dataset.from_dense(X, y, classification=False)))
    return d


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_to_json_formatting():
    text = to_json({"a": 0.1, "b": math.inf, "c": [1, True, None], "d": np.float64(1 / 3)})
    data = json.loads(text)
    assert data == {"a": 0.1, "b": None, "c": [1, True, None], "d": pytest.approx(1 / 3, rel=1e-16)}
    assert "0.33333333333333331" in text


def test_to_csv_is_rfc4180():
    text = to_csv(["C", "note"], [(0.5, "a,b"), (math.inf, True)])
    assert text == 'C,note\r\n0.5,"a,b"\r\ninf,1\r\n'


def test_train_writes_model(files, tmp_path, capsys):
    out = tmp_path / "m.json"
    code, _, _ = run(["train", "--data", files / "train.svm", "--c", 1, "--out", out], capsys)
    assert code == 0
    model = json.loads(out.read_text())
    assert model["grad_norm"] <= 1e-10 and len(model["w"]) == 3


def test_train_usage_and_io_errors(files, capsys):
    assert run(["train", "--data", files / "train.svm", "--c", 0], capsys)[0] == 2
    assert run(["train", "--data", files / "missing.svm", "--c", 1], capsys)[0] == 1
    bad = files / "bad.svm"
    bad.write_text("+1 2:1 1:1\n")
    code, _, err = run(["train", "--data", bad, "--c", 1], capsys)
    assert code == 1 and "line 1" in err
    with pytest.raises(SystemExit) as e:
        main(["train", "--data", str(files / "train.svm")])
    assert e.value.code == 2


def test_non_convergence_exit_code(files, capsys):
    code, _, _ = run(["train", "--data", files / "train.svm", "--c", 1e4, "--max-iters", 1, "--tol", 1e-300], capsys)
    assert code == 3


def test_model_select_report_and_csv(files, tmp_path, capsys):
    out, csv_path = tmp_path / "s.json", tmp_path / "s.csv"
    args = ["model-select", "--data", files / "train.svm", "--val", files / "val.svm", "--c-min", 0.01, "--c-max", 100, "--c-count", 21]
    code, _, _ = run(args + ["--out", out, "--csv", csv_path], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["T"] == 21 and 1 <= rep["trained_count"] <= 21
    lines = csv_path.read_bytes().split(b"\r\n")
    assert lines[0] == b"C,err_lo,err_hi,solved_flag"
    assert len([l for l in lines if l]) == 22
    run(args + ["--c-count", 1, "--out", out], capsys)
    assert json.loads(out.read_text())["trained_count"] == 1


def test_reports_are_byte_identical(files, tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"p{k}.json"
        csv_path = tmp_path / f"p{k}.csv"
        run(["path", "--data", files / "train.svm", "--seed", 3, "--epsilon", 0.05, "--c-max", 100, "--out", out, "--csv", csv_path], capsys)
        outs.append((out.read_bytes(), csv_path.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][1].startswith(b"C,error,next_C,gap\r\n")


def test_path_epsilon_one(files, capsys):
    code, text, _ = run(["path", "--data", files / "train.svm", "--val", files / "val.svm", "--epsilon", 1], capsys)
    assert code == 0 and json.loads(text)["trained_count"] == 1
    assert run(["path", "--data", files / "train.svm", "--epsilon", 2], capsys)[0] == 2


def test_bounds_csv(files, tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    code, text, _ = run(["bounds", "--data", files / "train.svm", "--val", files / "val.svm", "--c", 1, "--c-count", 7, "--csv", csv_path], capsys)
    assert code == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "C,err_lo,err_hi" and len(rows) == 8
    rep = json.loads(text)
    at_ref = [c for c in rep["curve"] if c["C"] == 1.0]
    assert at_ref and at_ref[0]["err_lo"] == at_ref[0]["err_hi"] == rep["error_at_C_ref"]


def test_loocv_partition(files, capsys):
    code, text, _ = run(["loocv", "--data", files / "train.svm", "--c", 0.01, "--kernel", "rbf"], capsys)
    rep = json.loads(text)
    assert code == 0 and rep["solved_count"] + rep["skipped_count"] == rep["n"] == 60


def test_lasso_screen(files, capsys):
    code, text, _ = run(["lasso-screen", "--data", files / "reg.svm", "--lambda-ratio", 0.5], capsys)
    rep = json.loads(text)
    assert code == 0 and set(rep) >= {"lambda", "screened_indices", "ball_radius"}
    assert all(1 <= j <= 10 for j in rep["screened_indices"])
    assert run(["lasso-screen", "--data", files / "reg.svm", "--lambda", -1], capsys)[0] == 2


def test_lr_from_svm(files, tmp_path, capsys):
    csv_path = tmp_path / "lr.csv"
    code, text, _ = run(["lr-from-svm", "--data", files / "train.svm", "--c", 1, "--new", files / "new.svm", "--csv", csv_path], capsys)
    rep = json.loads(text)
    assert code == 0 and len(rep["coefficients"]) == 3 and len(rep["log_odds"]) == 3
    for c in rep["coefficients"]:
        assert c["single"][0] <= c["intersected"][0] <= c["intersected"][1] <= c["single"][1]
    assert csv_path.read_text().splitlines()[0] == "j,svm,single_lo,single_hi,intersected_lo,intersected_hi"
