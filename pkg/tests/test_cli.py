import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mcpanova.cli import RunConfig, build_parser, config_from_args, execute, main
from mcpanova.data import write_csv
from mcpanova.inference import MaxTResult

from test_mmm import longitudinal_data


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_glm_dunnett_table(capsys):
    code, out, _ = run(["glm-dunnett", "--builtin", "nausea", "--alternative", "greater", "--seed", "1", "--format", "json"], capsys)
    assert code == 0
    res = MaxTResult.from_json(out)
    np.testing.assert_allclose(res.tstats, [2.03, 2.03, 2.31, 2.99], atol=0.01)
    np.testing.assert_allclose(res.adjusted_p, [0.077, 0.077, 0.040, 0.006], atol=0.005)
    assert res.seed == 1 and res.mc_error > 0


def test_chisq(capsys):
    code, out, _ = run(["chisq", "--builtin", "nausea", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["p"] == pytest.approx(0.095, abs=5e-4)


def test_output_is_byte_identical(capsys):
    argv = ["glm-anom", "--builtin", "nausea", "--seed", "3"]
    for fmt in ("text", "csv", "json"):
        _, a, _ = run(argv + ["--format", fmt], capsys)
        _, b, _ = run(argv + ["--format", fmt], capsys)
        assert a == b


def test_json_schema_round_trip(capsys):
    _, out, _ = run(["williams", "--builtin", "genes", "--subset", "treat=al", "--format", "json"], capsys)
    assert MaxTResult.from_json(out).to_json() + "\n" == out


def test_gen_then_anom_pipeline(tmp_path, capsys):
    path = tmp_path / "genes.csv"
    code, _, _ = run(["gen", "--genes", "--seed", "7", "--out", str(path)], capsys)
    assert code == 0
    points = tmp_path / "points.csv"
    code, out, _ = run(
        ["anom", "--input", str(path), "--response", "mrc5", "--factor", "conc", "--factor", "treat",
         "--format", "csv", "--plot-points", str(points), "--max-samples", "60000"],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 18
    assert rows[0]["label"] == "Co:al - GM"
    assert {r["seed"] for r in rows} == {"1"}
    with open(points) as fh:
        pts = list(csv.DictReader(fh))
    assert len(pts) == 18 and set(pts[0]) == {"label", "estimate", "ci_lower", "ci_upper"}


def test_factorial_anom_reports_anova(capsys):
    code, out, _ = run(
        ["factorial-anom", "--builtin", "genes", "--subset", "treat=la,pe,ti", "--factor", "conc",
         "--factor", "treat", "--format", "json", "--max-samples", "60000"],
        capsys,
    )
    assert code == 0
    d = json.loads(out)
    assert len(d["rows"]) == 15
    bonf = [t["bonferroni_p"] for t in d["anova"]["terms"]]
    np.testing.assert_allclose(bonf, [0.416, 0.00027, 0.058], rtol=0.01)


def test_two_way_joint_and_trend(capsys):
    code, out, _ = run(["two-way-joint", "--builtin", "genes", "--subset", "treat=al,la", "--factor", "conc",
                        "--secondary", "treat", "--cov", "hc0", "--format", "csv"], capsys)
    assert code == 0 and len(out.splitlines()) == 1 + 6
    code, out, _ = run(["trend", "--builtin", "genes", "--subset", "treat=al"], capsys)
    assert code == 0 and "(5+1)/2 - 0" in out


def test_ratio_and_dunnett(capsys):
    code, out, _ = run(["ratio", "--builtin", "genes", "--subset", "treat=pe", "--format", "csv"], capsys)
    assert code == 0 and "n1/Co" in out
    code, out, _ = run(["dunnett", "--builtin", "genes", "--subset", "treat=pe", "--base", "n1",
                        "--cov", "welch", "--df", "min"], capsys)
    assert code == 0 and "Co - n1" in out


def test_longitudinal(tmp_path, capsys):
    path = tmp_path / "long.csv"
    write_csv(longitudinal_data(), path)
    code, out, err = run(
        ["longitudinal", "--input", str(path), "--response", "response", "--factor", "group",
         "--subject", "subject", "--time", "time", "--format", "json"],
        capsys,
    )
    assert code == 0, err
    assert len(json.loads(out)["rows"]) == 6


def test_npar_separation_exit_code(capsys):
    code, out, err = run(["npar-dunnett", "--builtin", "genes", "--subset", "treat=pe"], capsys)
    assert code == 3
    assert "n1 - Co" in err and out == ""


def test_usage_errors(capsys):
    assert run(["dunnett", "--builtin", "genes", "--bogus"], capsys)[0] == 2
    assert run(["dunnett", "--builtin", "genes", "--base", "XX"], capsys)[0] == 2
    assert run(["anom", "--builtin", "nausea", "--conf-level", "1.5"], capsys)[0] == 2
    assert run(["anom", "--response", "y", "--factor", "g"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_data_errors(tmp_path, capsys):
    assert run(["dunnett", "--input", str(tmp_path / "none.csv"), "--response", "y", "--factor", "g"], capsys)[0] == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("y,g\n1,a\nx,b\n")
    code, _, err = run(["dunnett", "--input", str(bad), "--response", "y", "--factor", "g"], capsys)
    assert code == 3 and "row 3" in err
    bad.write_text("y,g\n1,a\n2,a\n1,b\n")
    code, _, err = run(["dunnett", "--input", str(bad), "--response", "y", "--factor", "g", "--cov", "hc3"], capsys)
    assert code == 3


def test_degenerate_binomial_exit_code(tmp_path, capsys):
    path = tmp_path / "b.csv"
    path.write_text("y,g\n" + "".join(f"0,a\n" for _ in range(5)) + "0,b\n1,b\n1,b\n0,b\n")
    code, _, err = run(["glm-dunnett", "--input", str(path), "--response", "y", "--factor", "g"], capsys)
    assert code == 3 and "DegenerateVarianceError" in err


def test_reproduce_command(capsys):
    code, out, _ = run(["reproduce", "dunnett", "--seed", "1"], capsys)
    assert code == 0
    assert out.count("pass") >= 8
    _, a, _ = run(["reproduce", "all", "--seed", "1", "--format", "json"], capsys)
    _, b, _ = run(["reproduce", "all", "--seed", "2", "--format", "json"], capsys)
    verdicts = lambda text: [c["passed"] for c in json.loads(text)["checks"]]
    assert verdicts(a) == verdicts(b)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("anom", conf_level=0.0)
    ns = build_parser().parse_args(["anom", "--builtin", "nausea"])
    cfg = config_from_args(ns)
    assert cfg.seed == 1 and cfg.cov == "hc3" and cfg.alternative == "two-sided"
    code, text = execute(RunConfig("chisq", builtin="nausea"))
    assert code == 0 and "p = 0.09" in text


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mcpanova", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "mcpanova" in out.stdout
