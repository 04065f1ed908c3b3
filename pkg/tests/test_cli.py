import json

import pytest

import cli

HEAT = {"m_dims": [1]}


def write_scenario(path, *checks):
    path.write_text(json.dumps({"schema": 1, "id": "cli", "operator": HEAT, "checks": list(checks)}), encoding="utf-8")
    return str(path)


def reproduction(tol=1e-3):
    return {"id": "repro", "kind": "reproduction_limit", "xi": [0.0], "eps": [0.1, 0.01, 0.001, 0.0001], "tol": tol}


def quadrature():
    return {"id": "mass", "kind": "kernel_normalization", "pole": [0, 0], "r": 2.0, "method": "quadrature",
            "abs_tol": 1e-6}


def test_run_passes_and_writes_reports(tmp_path):
    scn = write_scenario(tmp_path / "ok.json", reproduction(), quadrature())
    out = tmp_path / "out"
    assert cli.main(["run", scn, "--out", str(out)]) == cli.EXIT_OK
    assert (out / "report.json").exists()
    lines = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id,kind,truth,estimate,std_error,pass"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["mass", "repro"]
    assert all(ln.endswith(",pass") for ln in lines[1:])


def test_run_exit_codes(tmp_path, capsys):
    failing = write_scenario(tmp_path / "fail.json", reproduction(tol=1e-12))
    assert cli.main(["run", failing, "--out", str(tmp_path / "f")]) == cli.EXIT_FAIL
    assert "repro" in capsys.readouterr().err

    unknown = write_scenario(tmp_path / "unknown.json", {
        "id": "m", "kind": "mvf_volume", "pole": [0, 0], "r": 1.0, "solution": "nope",
        "mc": {"samples": 100, "seed": 1},
    })
    assert cli.main(["run", unknown, "--out", str(tmp_path / "u")]) == cli.EXIT_CONFIG

    broken = tmp_path / "broken.json"
    broken.write_text('{"schema": 1, "id": ', encoding="utf-8")
    assert cli.main(["run", str(broken)]) == cli.EXIT_CONFIG
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_runs_are_reproducible_across_thread_counts(tmp_path):
    mvf = {"id": "vol", "kind": "mvf_volume", "pole": [0.3, 0.5], "r": 1.0, "solution": "x2+2t",
           "mc": {"samples": 4000, "seed": 11}, "abs_tol": 0.05}
    scn = write_scenario(tmp_path / "mc.json", mvf, reproduction())
    a, b = tmp_path / "a", tmp_path / "b"
    code_a = cli.main(["run", scn, "--out", str(a), "--threads", "1"])
    code_b = cli.main(["run", scn, "--out", str(b), "--threads", "3"])
    assert code_a == code_b
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    assert cli.main(["report-diff", str(a / "report.json"), str(b / "report.json"), "--tol", "0"]) == cli.EXIT_OK


def test_report_diff_flags_changes(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"schema": 1, "scenario": "s", "checks": [{"id": "x", "estimate": 1.0, "passed": True}]}))
    b.write_text(json.dumps({"schema": 1, "scenario": "s", "checks": [{"id": "x", "estimate": 1.1, "passed": True}]}))
    assert cli.main(["report-diff", str(a), str(b)]) == cli.EXIT_FAIL
    assert capsys.readouterr().out.startswith("x\testimate\t1.0\t1.1")
    assert cli.main(["report-diff", str(a), str(b), "--field-tol", "estimate=0.1"]) == cli.EXIT_OK
    assert cli.main(["report-diff", str(a), str(b), "--field-tol", "estimate"]) == cli.EXIT_CONFIG
    assert cli.main(["report-diff", str(a), str(tmp_path / "none.json")]) == cli.EXIT_CONFIG


def test_group_check(capsys):
    assert cli.main(["group-check", "heisenberg_heat(1)", "--samples", "200"]) == cli.EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["homogeneous_dim"] == 5
    assert out["hormander_rank"] == 4
    assert out["axioms"]["passed"] is True
    assert "[X1,X2]" in out["brackets"]
    assert cli.main(["group-check", "nope"]) == cli.EXIT_CONFIG


def test_reach_cone(tmp_path, capsys):
    code = cli.main(["reach-cone", "--seed", "42", "--n", "200", "--no-steer", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["violations"] == 0 and report["n"] == 200
    lines = (tmp_path / "endpoints.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x1,x2,t,inside_cone"
    assert len(lines) == 201


def test_reach_cone_needs_a_seed():
    with pytest.raises(SystemExit):
        cli.main(["reach-cone", "--n", "10"])


def test_log_level_option(tmp_path):
    scn = write_scenario(tmp_path / "quiet.json", reproduction())
    assert cli.main(["--log-level", "warning", "run", scn, "--out", str(tmp_path / "q")]) == cli.EXIT_OK
    with pytest.raises(SystemExit):
        cli.main(["--log-level", "loud", "run", scn])
    assert cli.main(["--log-level", "info", "group-check", "heisenberg(1)", "--samples", "10"]) == cli.EXIT_OK


@pytest.mark.parametrize("field, value", [("solution", "const(1,2)"), ("phi", "bump(1,2)"), ("phi", "bump(0)")])
def test_malformed_catalog_arguments_exit_with_config_error(tmp_path, capsys, field, value):
    if field == "solution":
        check = {"id": "m", "kind": "mvf_volume", "pole": [0, 0], "r": 1.0, "solution": value,
                 "mc": {"samples": 100, "seed": 1}}
    else:
        check = {**reproduction(), "phi": value}
    scn = write_scenario(tmp_path / "bad.json", check)
    assert cli.main(["run", scn, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert f"checks.0.{field}" in capsys.readouterr().err
