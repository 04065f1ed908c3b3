# mvf/runner/executor.py
from __future__ import annotations
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Tuple

from mvf import __version__
from mvf.runner.checks import CheckResult, RunContext, run_check
from mvf.runner.planner import Plan
from mvf.utils.logger import logger


# ---------------- Helpers ---------------- #

def _capture_error(step_idx: int, check_id: str, artifacts: Dict[str, Any], err: Exception) -> None:
    logger.exception(f"Step {step_idx} failed: {check_id}")
    artifacts.setdefault("errors", {})[check_id] = f"{type(err).__name__}: {err}"


def _failed(check: Any, err: Exception) -> CheckResult:
    return CheckResult(id=check.id, kind=check.kind, passed=False, error=f"{type(err).__name__}: {err}")


def execute_plan(plan: Plan, ctx: RunContext) -> Tuple[List[CheckResult], Dict[str, Any]]:
    """
    Run every step of the plan in check-id order. A step that raises is
    logged with its traceback and recorded as a failed result; the run
    continues with the next step.
    """
    scn = plan.scenario
    artifacts: Dict[str, Any] = {
        "out_dir": ctx.out_dir,
        "steps": [],
        "metadata": {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
            "threads": ctx.threads,
            "samples_scale": ctx.samples_scale,
        },
    }
    results: List[CheckResult] = []

    logger.info(f"Executing scenario {scn.id!r} with {len(plan.steps)} check(s)")

    for i, step in enumerate(plan.steps, start=1):
        check = step.check
        t0 = time.perf_counter()
        try:
            res = run_check(step, ctx)
            status = "ok" if res.passed else "failed"
        except Exception as e:
            _capture_error(i, check.id, artifacts, e)
            res = _failed(check, e)
            status = "error"
        results.append(res)
        artifacts["steps"].append(
            {"id": check.id, "kind": check.kind, "status": status, "seconds": round(time.perf_counter() - t0, 3)}
        )

    failed = [r.id for r in results if not r.passed]
    artifacts["failed"] = failed
    if failed:
        logger.warning(f"[executor] {len(failed)} check(s) failed: {failed}")
    else:
        logger.info(f"[executor] all {len(results)} check(s) passed")
    return results, artifacts
