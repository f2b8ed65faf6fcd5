import csv
import io
import json

import pytest

from conftest import polys, proportional
from greenrec.cli import build_parser, main
from greenrec.recurrence import load_recurrence
from greenrec.symcore import Poly


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


def rows_of(text):
    return list(csv.DictReader(io.StringIO("".join(l + "\n" for l in text.splitlines() if not l.startswith("#")))))


def coefficient_list(rec, shifts):
    zero = Poly.zero(rec.variables)
    return [rec.coefficients.get(s, zero) for s in shifts]


# ---------------------------------------------------------------------------
# derive


def test_derive_laplace_matches_closed_forms(tmp_path, cache_dir):
    code, text = run(["derive", "--kernel", "laplace2d", "--out", str(tmp_path / "art")])
    assert code == 0
    assert "large recurrence order = 3 (bound a + h = 5)" in text
    large = load_recurrence((tmp_path / "art" / "large.json").read_text())
    expected = polys(2, ["x1^3 + x1*x2^2", "(3*n + 1)*x1^2 + (n - 1)*x2^2", "(3*n^2 - n)*x1", "n*(n - 1)^2"])
    assert proportional(coefficient_list(large, [2, 1, 0, -1]), expected)
    small = load_recurrence((tmp_path / "art" / "small.json").read_text())
    assert proportional(coefficient_list(small, [0, -1, -2]), polys(2, ["x2^2", "0", "(n - 1)*(n - 2)"]))
    for name in ("pde.json", "ode.json", "large.json", "small.json"):
        assert (tmp_path / "art" / name).exists()


def test_derive_fills_cache(tmp_path, cache_dir):
    assert run(["derive", "--kernel", "laplace2d", "--out", str(tmp_path / "a")])[0] == 0
    entries = list(cache_dir.iterdir())
    assert len(entries) == 1 and len(entries[0].name) == 64
    # second run reads the cache and writes identical artifacts
    assert run(["derive", "--kernel", "laplace2d", "--out", str(tmp_path / "b")])[0] == 0
    assert (tmp_path / "a" / "large.json").read_text() == (tmp_path / "b" / "large.json").read_text()


def test_derive_from_pde_file(tmp_path, cache_dir):
    doc = {"dimension": 2, "order": 2, "coefficients": [
        {"multi_index": [2, 0], "coefficient": "3"}, {"multi_index": [0, 2], "coefficient": "3"}]}
    path = tmp_path / "scaled.json"
    path.write_text(json.dumps(doc))
    code, text = run(["derive", "--pde", str(path), "--out", str(tmp_path / "art")])
    assert code == 0 and "ode order a = 2" in text


def test_derive_missing_file(tmp_path, cache_dir):
    code, _ = run(["derive", "--pde", str(tmp_path / "absent.json"), "--out", str(tmp_path / "art")])
    assert code == 2


def test_derive_malformed_file(tmp_path, cache_dir):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(["derive", "--pde", str(path), "--out", str(tmp_path / "art")])[0] == 2


def test_derive_helmholtz_artifacts_verify(tmp_path, cache_dir):
    art = tmp_path / "art"
    assert run(["derive", "--kernel", "helmholtz2d", "--k", "1.5", "--out", str(art)])[0] == 0
    code, text = run(["verify", "--kernel", "helmholtz2d", "--k", "1.5", "--artifacts", str(art), "--points", "5"])
    assert code == 0 and text.startswith("PASS helmholtz2d")


# ---------------------------------------------------------------------------
# eval


def test_eval_check_column(cache_dir):
    code, text = run(["eval", "--kernel", "laplace2d", "--point", "3,4", "--P", "9", "--check", "--format", "csv"])
    assert code == 0
    rows = rows_of(text)
    assert [r["n"] for r in rows] == [str(i) for i in range(10)]
    assert all(r["branch"] == "large" for r in rows)
    assert max(float(r["rel_error"]) for r in rows) <= 1e-10


def test_eval_axis_point_odd_rows_zero(cache_dir):
    code, text = run(["eval", "--kernel", "laplace2d", "--point", "0,1", "--P", "5", "--format", "csv"])
    assert code == 0
    rows = rows_of(text)
    assert all(r["branch"] == "small" for r in rows)
    assert all(float(rows[i]["value_re"]) == 0.0 for i in (1, 3, 5))
    assert float(rows[2]["value_re"]) != 0.0


def test_eval_full_precision_output(cache_dir):
    _, text = run(["eval", "--kernel", "laplace2d", "--point", "3,4", "--P", "1", "--format", "csv"])
    value = rows_of(text)[0]["value_re"]
    assert float(value) == float(repr(float(value)))
    assert len(value.lstrip("-").replace(".", "").lstrip("0")) >= 16


def test_eval_table_format(cache_dir):
    code, text = run(["eval", "--kernel", "laplace2d", "--point", "3,4", "--P", "2"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0].split() == ["n", "branch", "value_re", "value_im"]
    assert len(lines) == 4


def test_eval_helmholtz_requires_wave_number(cache_dir):
    assert run(["eval", "--kernel", "helmholtz2d", "--point", "1,1"])[0] == 2


def test_eval_helmholtz_complex_values(cache_dir):
    code, text = run(["eval", "--kernel", "helmholtz2d", "--k", "1", "--point", "1,0.5", "--P", "4",
                      "--check", "--format", "csv"])
    assert code == 0
    rows = rows_of(text)
    assert any(float(r["value_im"]) != 0 for r in rows)
    assert max(float(r["rel_error"]) for r in rows) <= 1e-10


@pytest.mark.parametrize("argv", [
    ["--point", "0,0"],
    ["--point", "1"],
    ["--point", "1,x"],
    ["--point", "1,1", "--P", "-1"],
    ["--point", "1,1", "--xi", "0"],
])
def test_eval_rejects_bad_input(cache_dir, argv):
    assert run(["eval", "--kernel", "laplace2d", *argv])[0] == 2


# ---------------------------------------------------------------------------
# verify


def test_verify_all_builtins(cache_dir):
    code, text = run(["verify", "--all", "--points", "4"])
    assert code == 0
    lines = text.splitlines()
    assert len(lines) == 8 and all(line.startswith("PASS") for line in lines)


def test_verify_detects_tampered_artifact(tmp_path, cache_dir):
    art = tmp_path / "art"
    run(["derive", "--kernel", "laplace2d", "--out", str(art)])
    doc = json.loads((art / "large.json").read_text())
    for entry in doc["coefficients"]:
        if entry["shift"] == 0:
            entry["coefficient"] = "3*x1*n^2 - 2*x1*n"
    (art / "large.json").write_text(json.dumps(doc))
    code, text = run(["verify", "--kernel", "laplace2d", "--artifacts", str(art), "--points", "4"])
    assert code == 3 and text.startswith("FAIL laplace2d")


def test_verify_custom_pde_skipped(tmp_path, cache_dir, capsys):
    path = tmp_path / "custom.json"
    path.write_text(json.dumps({"dimension": 2, "order": 2, "coefficients": [
        {"multi_index": [2, 0], "coefficient": "1"}, {"multi_index": [0, 2], "coefficient": "2"}]}))
    code, text = run(["verify", "--pde", str(path)])
    assert code == 0 and text.startswith("SKIP")
    assert "warning" in capsys.readouterr().err


def test_verify_needs_a_target(cache_dir):
    assert run(["verify"])[0] == 2


# ---------------------------------------------------------------------------
# qbx


def test_qbx_backends_agree(cache_dir):
    code, text = run(["qbx", "--ellipse", "2,1", "--density", "cos10t", "--p", "5", "--N", "400",
                      "--backend", "both"])
    assert code == 0
    rows = rows_of(text)
    assert len(rows) == 400
    assert max(float(r["backend_agreement"]) for r in rows) <= 1e-8
    assert max(float(r["recurrence_rel_error"]) for r in rows) <= 1e-5


def test_qbx_single_backend_columns(cache_dir, tmp_path):
    path = tmp_path / "q.csv"
    code, text = run(["qbx", "--N", "64", "--density", "one", "--out", str(path)])
    assert code == 0 and text == ""
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["node", "t", "x", "y", "reference", "recurrence", "recurrence_rel_error"]


def test_qbx_flops(cache_dir):
    code, text = run(["qbx", "--flops", "--p-range", "1..12"])
    assert code == 0
    summary = {l[2:].split("=")[0]: float(l.split("=")[1]) for l in text.splitlines() if l.startswith("# summary.")}
    assert summary["summary.exponent.direct"] - summary["summary.exponent.recurrence"] >= 0.6
    rows = rows_of(text)
    assert [int(r["p"]) for r in rows] == list(range(1, 13))


@pytest.mark.parametrize("argv", [
    ["--p", "-1"],
    ["--N", "4"],
    ["--ellipse", "2,-1"],
    ["--density", "sin3t"],
    ["--radius-factor", "0"],
    ["--flops", "--p-range", "5..2"],
    ["--jobs", "0"],
])
def test_qbx_rejects_bad_input(cache_dir, argv):
    assert run(["qbx", *argv])[0] == 2


def test_qbx_reference_failure_exit_code(cache_dir):
    # 10 nodes cannot certify a cos(60 t) reference
    assert run(["qbx", "--N", "10", "--density", "cos60t"])[0] == 3


# ---------------------------------------------------------------------------
# experiment


def test_experiment_slope_seeded(tmp_path, cache_dir):
    argv = ["experiment", "slope", "--kernel", "laplace2d", "--n", "9", "--seed", "7"]
    code, text = run(argv + ["--out-dir", str(tmp_path / "a")])
    assert code == 0
    slope = float(next(l for l in text.splitlines() if l.startswith("slope = ")).split("=")[1])
    assert -2.3 <= slope <= -1.7
    run(argv + ["--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "slope.csv").read_bytes() == (tmp_path / "b" / "slope.csv").read_bytes()
    assert "# seed=7" in (tmp_path / "a" / "slope.csv").read_text()


def test_experiment_assumptions_biharmonic(tmp_path, cache_dir):
    code, text = run(["experiment", "assumptions", "--kernel", "biharmonic2d", "--resolution", "16",
                      "--out-dir", str(tmp_path)])
    assert code == 0
    assert "odd_in_bounds = True" in text


def test_experiment_heatmap_writes_csv(tmp_path, cache_dir):
    code, _ = run(["experiment", "heatmap", "--n", "3", "--resolution", "16", "--out-dir", str(tmp_path)])
    assert code == 0
    body = (tmp_path / "heatmap.csv").read_text()
    assert "# resolution=16" in body
    assert len(rows_of(body)) == 256


@pytest.mark.parametrize("argv", [
    ["experiment", "fig9"],
    ["experiment", "heatmap", "--resolution", "8"],
    ["experiment", "assumptions", "--c", "4", "--resolution", "16"],
    ["eval", "--kernel", "laplace2d", "--point", "1,1", "--bogus"],
    ["frobnicate"],
    [],
])
def test_usage_errors(tmp_path, cache_dir, argv):
    assert run(argv + (["--out-dir", str(tmp_path)] if argv[:1] == ["experiment"] and len(argv) > 1 else []))[0] == 2


def subcommand_parsers():
    parser = build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


@pytest.mark.parametrize("name", ["derive", "eval", "verify", "qbx", "experiment"])
def test_help_lists_every_flag(name, capsys):
    sub = subcommand_parsers()[name]
    assert main([name, "--help"], io.StringIO()) == 0
    shown = capsys.readouterr().out
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in shown
