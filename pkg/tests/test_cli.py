import csv
import io
import json

import pytest

from nnbounds.cli import run


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_count_plain_text(capsys):
    assert _run(capsys, "count", "--d", "2", "--W", "3", "--l", "2") == (0, "25\n", "")


def test_lip_bound_json_and_csv(capsys):
    code, out, _ = _run(capsys, "lip-bound", "--W", "2", "--l", "1", "--w", "1")
    data = json.loads(out)
    assert code == 0 and data["C"] == [2.0, 21.0] and data["closed_form"] == 36.0
    code, out, _ = _run(capsys, "lip-bound", "--W", "2", "--l", "1", "--w", "0", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["C"]) for r in rows] == [2.0, 11.0]


def test_lip_verify_exit_codes(capsys):
    code, out, _ = _run(capsys, "lip-verify", "--W", "2", "--l", "2", "--pairs", "200", "--grid", "32")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = _run(capsys, "lip-verify", "--W", "2", "--l", "2", "--pairs", "200", "--grid", "32",
                        "--scale-certificate", "1e-6")
    data = json.loads(out)
    assert code == 1 and not data["passed"] and "violating_pair" in data


def test_entropy_sources(capsys, tmp_path):
    code, out, _ = _run(capsys, "entropy", "--interval", "0", "1", "--n-max", "2", "--format", "csv")
    assert code == 0
    assert [float(r["radius"]) for r in csv.DictReader(io.StringIO(out))] == [0.5, 0.25, 0.125]
    cloud = tmp_path / "cloud.csv"
    cloud.write_text("0\n0.5\n1\n")
    code, out, _ = _run(capsys, "entropy", "--cloud", str(cloud), "--n-max", "2")
    data = json.loads(out)
    radii = [r["radius"] for r in data["results"]]
    assert radii == [0.5, 0.5, 0.0]
    code, out, _ = _run(capsys, "entropy", "--lip-ball", "1", "1", "2", "1", "--n-max", "1", "--format", "csv")
    assert code == 0 and len(list(csv.DictReader(io.StringIO(out)))) == 2


def test_bound_tradeoff_super(capsys):
    code, out, _ = _run(capsys, "bound", "--W", "4", "--l", "3", "--format", "csv")
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == 0 and row["n"] == "53" and row["formula_id"] == "polylog-deep"
    code, out, _ = _run(capsys, "tradeoff", "--l-list", "2,4,8,16", "--format", "csv")
    values = [float(r["value"]) for r in csv.DictReader(io.StringIO(out))]
    assert code == 0 and all(b < a for a, b in zip(values, values[1:]))
    code, out, _ = _run(capsys, "super", "--regime", "deep")
    assert code == 0 and "polynomial" in json.loads(out)["classification"]
    code, out, _ = _run(capsys, "super", "--regime", "shallow")
    assert code == 0 and "polylog" in json.loads(out)["classification"]


def test_approx_builtin_and_csv_target(capsys, tmp_path):
    args = ("approx", "--target-fn", "abs", "--grid", "33", "--samples", "50", "--refine", "50", "--format", "csv")
    code, out, _ = _run(capsys, *args)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["error"]) <= float(row["sample_error"])
    target = tmp_path / "t.csv"
    target.write_text("x,f\n0.0,1.0\n0.5,0.0\n1.0,1.0\n")
    code, out, _ = _run(capsys, "approx", "--target", str(target), "--samples", "20", "--refine", "0",
                        "--widths", "2,3", "--format", "csv")
    errs = [float(r["error"]) for r in csv.DictReader(io.StringIO(out))]
    assert code == 0 and len(errs) == 2 and errs[1] <= errs[0]


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nW = 3\nl = 2\n")
    assert _run(capsys, "--config", str(cfg), "count")[1] == "22\n"
    assert _run(capsys, "--config", str(cfg), "count", "--W", "2")[1] == "13\n"
    cfg.write_text("bogus = 1\n")
    code, _, err = _run(capsys, "--config", str(cfg), "count")
    assert code == 2 and "bogus" in err


def test_out_resolves_against_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("NNBOUNDS_OUTPUT_DIR", str(tmp_path))
    assert _run(capsys, "lip-bound", "--W", "2", "--out", "lip.json")[0] == 0
    assert json.loads((tmp_path / "lip.json").read_text())["n"] == 7


@pytest.mark.parametrize(
    "argv",
    [
        ["count", "--W", "0"],
        ["lip-bound", "--W", "1", "--l", "2"],
        ["lip-bound", "--act", "swish"],
        ["entropy", "--cloud", "/nonexistent.csv"],
        ["bound", "--W", "4", "--l", "1", "--w", "0"],
        ["super", "--n-exp", "8,9"],
        ["frobnicate"],
    ],
)
def test_bad_input_exits_2(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2 and err


def test_repeat_runs_are_byte_identical(capsys):
    argv = ["lip-verify", "--d", "2", "--W", "3", "--l", "2", "--pairs", "700", "--grid", "8", "--seed", "4"]
    outs = [_run(capsys, *argv)[1], _run(capsys, *argv)[1], _run(capsys, "--threads", "1", *argv)[1]]
    assert outs[0] == outs[1] == outs[2]
