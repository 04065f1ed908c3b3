import csv
import json
from pathlib import Path

import pytest

from mvf.errors import ConfigError
from mvf.runner.checks import RunContext
from mvf.runner.executor import execute_plan
from mvf.runner.planner import load_scenario, parse_scenario, plan_from_scenario
from mvf.runner.report import diff_reports
from mvf.utils.export import fmt_float, save_report, write_rows_csv
from mvf.utils.io import ensure_dir, make_run_dir

HEAT = {"m_dims": [1]}


def scenario(*checks, operator=HEAT, **extra):
    return json.dumps({"schema": 1, "id": "unit", "operator": operator, "checks": list(checks), **extra})


def reproduction(cid="repro", tol=1e-3):
    return {"id": cid, "kind": "reproduction_limit", "xi": [0.2], "eps": [0.1, 0.01, 0.001, 0.0001], "tol": tol}


def divergence(cid="div"):
    return {"id": cid, "kind": "divergence_identity", "pairs": 2, "seed": 3}


# ---------------- planner ---------------- #

def test_malformed_json_reports_position():
    with pytest.raises(ConfigError) as info:
        parse_scenario('{"schema": 1,\n "id": }', "bad.json")
    assert info.value.diagnostics[0].startswith("line 2, column")


def test_schema_problems_name_the_field():
    with pytest.raises(ConfigError) as info:
        parse_scenario(scenario({"id": "div", "kind": "divergence_identity"}))
    assert any("seed" in d and d.startswith("checks.0") for d in info.value.diagnostics)

    with pytest.raises(ConfigError):
        parse_scenario(json.dumps({"schema": 2, "id": "x", "checks": [divergence()]}))
    with pytest.raises(ConfigError):
        parse_scenario(scenario(divergence(), colour="red"))
    with pytest.raises(ConfigError):
        parse_scenario(scenario({"id": "k", "kind": "kernel_normalization", "pole": [0, 0], "r": 1.0}))


def test_unresolved_identifiers_are_collected():
    bad = [
        {"id": "a", "kind": "mvf_volume", "pole": [0, 0], "r": 1.0, "solution": "nope",
         "mc": {"samples": 100, "seed": 1}},
        {"id": "b", "kind": "normalization", "pole": [0, 0, 0], "times": [1.0]},
        {"id": "c", "kind": "group_axioms", "seed": 0},
        reproduction("c"),
    ]
    with pytest.raises(ConfigError) as info:
        plan_from_scenario(parse_scenario(scenario(*bad)))
    diags = info.value.diagnostics
    assert any(d.startswith("checks.0.solution") for d in diags)
    assert any(d.startswith("checks.1.pole") for d in diags)
    assert any(d.startswith("checks.2.group") for d in diags)
    assert any("duplicate ids ['c']" in d for d in diags)


def test_plan_orders_steps_by_id():
    plan = plan_from_scenario(parse_scenario(scenario(reproduction("z_repro"), divergence("a_div"))))
    assert [s.check.id for s in plan.steps] == ["a_div", "z_repro"]
    assert plan.steps[0].op.N == 1


def test_bundled_scenarios_plan_cleanly():
    paths = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.json"))
    assert len(paths) == 4
    plans = {p.stem: plan_from_scenario(load_scenario(str(p))) for p in paths}
    cone = next(s.check for s in plans["reach_cone"].steps if s.check.kind == "reach_cone")
    assert cone.n == 10_000 and cone.R == 1.0


def test_check_operator_overrides_the_scenario():
    check = {**divergence(), "operator": {"m_dims": [1, 1], "c": -0.2}}
    plan = plan_from_scenario(parse_scenario(scenario(check)))
    assert plan.steps[0].op.dim == 3
    assert plan.steps[0].op.c == -0.2


# ---------------- executor ---------------- #

def test_execute_plan_records_verdicts_and_errors(tmp_path):
    inadmissible = {"id": "err", "kind": "mvf_volume", "pole": [0, 0], "r": 1.0,
                    "solution": "gamma_pole(0.1,-0.05)", "mc": {"samples": 100, "seed": 1}}
    plan = plan_from_scenario(parse_scenario(scenario(
        divergence("div"), reproduction("fail", tol=1e-12), inadmissible,
    )))
    results, artifacts = execute_plan(plan, RunContext(out_dir=str(tmp_path)))

    by_id = {r.id: r for r in results}
    assert by_id["div"].passed and by_id["div"].error is None
    assert not by_id["fail"].passed and by_id["fail"].error is None
    assert not by_id["err"].passed and by_id["err"].error.startswith("DomainError")
    assert artifacts["failed"] == ["err", "fail"]
    assert [s["status"] for s in artifacts["steps"]] == ["ok", "error", "failed"]
    assert "err" in artifacts["errors"]
    assert artifacts["metadata"]["threads"] == 1


def test_decay_check_needs_a_ladder_below_the_peak(tmp_path):
    short = {"id": "short", "kind": "claim2_decay", "pole": [0.0, 0.0], "r": 2.0, "k_min": 0, "k_max": 1}
    full = {"id": "full", "kind": "claim2_decay", "pole": [0.0, 0.0], "r": 2.0}
    plan = plan_from_scenario(parse_scenario(scenario(short, full)))
    results, _ = execute_plan(plan, RunContext(out_dir=str(tmp_path)))
    by_id = {r.id: r for r in results}
    assert by_id["short"].details["rungs"] == 0
    assert not by_id["short"].passed and by_id["short"].error is None
    assert by_id["full"].details["rungs"] >= 2


def test_explicit_zero_tolerance_is_kept():
    check = {"id": "vol", "kind": "mvf_volume", "pole": [0.3, 0.5], "r": 1.0, "solution": "const",
             "mc": {"samples": 3200, "seed": 5}, "abs_tol": 0.0}
    plan = plan_from_scenario(parse_scenario(scenario(check)))
    results, _ = execute_plan(plan, RunContext())
    assert results[0].details["abs_tol"] == 0.0


# ---------------- export ---------------- #

def test_fmt_float():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(None) == ""
    assert fmt_float(True) == "1"
    assert fmt_float(7) == "7"
    assert fmt_float(float("nan")) == "nan"
    assert fmt_float(float("-inf")) == "-inf"


def test_save_report_is_ordered_and_json_safe(tmp_path):
    results = [
        {"id": "b", "kind": "k", "truth": 1.0, "estimate": 0.5, "std_error": None, "passed": False,
         "details": {"worst": float("inf")}},
        {"id": "a", "kind": "k", "truth": 0.0, "estimate": 1e-17, "std_error": 1e-3, "passed": True, "details": {}},
    ]
    paths = save_report(str(tmp_path), "unit", results, {"version": "x"})
    with open(paths["csv"], encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["id", "kind", "truth", "estimate", "std_error", "pass"]
    assert [r[0] for r in rows[1:]] == ["a", "b"]
    assert rows[2][-1] == "fail" and rows[2][4] == ""

    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["schema"] == 1 and report["scenario"] == "unit"
    assert report["checks"][1]["details"]["worst"] == "inf"


def test_write_rows_csv(tmp_path):
    path = write_rows_csv(str(tmp_path / "sub" / "pts.csv"), [{"x1": 0.5, "t": -1}])
    assert (tmp_path / "sub" / "pts.csv").read_text(encoding="utf-8") == "x1,t\n0.5,-1\n"
    assert path.endswith("pts.csv")


# ---------------- report diff ---------------- #

def _report(**checks):
    return {"schema": 1, "scenario": "unit", "checks": [{"id": k, **v} for k, v in checks.items()]}


def test_diff_reports():
    a = _report(x={"truth": 1.0, "estimate": 1.0, "passed": True, "details": {"errors": [1e-3, 2e-3]}},
                y={"estimate": 0.5, "passed": True})
    assert diff_reports(a, a, 1e-12) == []

    b = _report(x={"truth": 1.0, "estimate": 1.0 + 1e-6, "passed": False, "details": {"errors": [1e-3, 2e-3]}},
                z={"estimate": 0.5, "passed": True})
    fields = {(d.check, d.field) for d in diff_reports(a, b, 1e-12)}
    assert fields == {("x", "passed"), ("x", "estimate"), ("y", "<presence>"), ("z", "<presence>")}

    relaxed = diff_reports(a, b, 1e-12, {"estimate": 1e-3})
    assert {(d.check, d.field) for d in relaxed} == {("x", "passed"), ("y", "<presence>"), ("z", "<presence>")}


def test_diff_reports_non_finite_values():
    a = _report(x={"estimate": "nan", "passed": True, "details": {"worst": "inf"}})
    b = _report(x={"estimate": "nan", "passed": True, "details": {"worst": 1.0}})
    assert [d.field for d in diff_reports(a, a, 0.0)] == []
    assert [d.field for d in diff_reports(a, b, 0.0)] == ["details.worst"]


# ---------------- run directories ---------------- #

def test_run_dirs_are_fresh_and_labels_sanitized(tmp_path):
    first = Path(make_run_dir(str(tmp_path), label="heat mvf/v2"))
    second = Path(make_run_dir(str(tmp_path), label="heat mvf/v2"))
    assert first.parent == tmp_path.resolve() and first.is_dir()
    assert first.name.endswith("-heat_mvf_v2")
    assert second != first and second.is_dir()


def test_ensure_dir_rejects_a_file(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("x", encoding="utf-8")
    assert ensure_dir(str(tmp_path / "a" / "b")) == str((tmp_path / "a" / "b").resolve())
    with pytest.raises(ConfigError):
        ensure_dir(str(blocker))
