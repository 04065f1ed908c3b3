# mvf/runner/checks.py
"""
Named checks. Each takes a resolved plan step and a run context and returns
a CheckResult with a truth value, an estimate, a standard error when the
estimate is random, the verdict and a details dict for report.json.

Public API:
    CheckResult, RunContext, run_check, CHECKS
"""

from __future__ import annotations
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field

from mvf.groups.core import check_axioms
from mvf.groups.fields import bracket_table, field_to_sparse, group_frame, hormander_rank, \
    check_invariance_homogeneity, stratification_depth
from mvf.integrate.montecarlo import kernel_mass, mc_kernel_integral, surface_via_derivative
from mvf.kernels.geometry import claim2_decay, envelope, measure_peak
from mvf.kernels.kolmo import (
    below_pole, chapman_kolmogorov, expm_nilpotent, gamma_eval, homogeneity_residual,
    normalization_error, pde_residual,
)
from mvf.meanvalue.catalog import bump_from_id, solution_from_id
from mvf.meanvalue.formulas import KernelEval, surface_formula_rhs, volume_formula_rhs
from mvf.meanvalue.identities import divergence_identity_residual, random_polynomial, reproduction_limit
from mvf.reach.control import check_H4, cone_experiment, integrate_curve, steer_min_energy
from mvf.runner.planner import PlanStep
from mvf.utils.export import write_rows_csv
from mvf.utils.logger import logger
from mvf.utils.rng import stream


class CheckResult(BaseModel):
    id: str
    kind: str
    truth: Optional[float] = None
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None


@dataclass(frozen=True)
class RunContext:
    out_dir: Optional[str] = None
    threads: int = 1
    samples_scale: float = 1.0

    def path(self, name: str) -> Optional[str]:
        return os.path.join(self.out_dir, name) if self.out_dir else None


def _result(step: PlanStep, passed: bool, truth: Any = None, estimate: Any = None,
            std_error: Any = None, details: Optional[Dict[str, Any]] = None) -> CheckResult:
    f = lambda v: None if v is None else float(v)
    return CheckResult(id=step.check.id, kind=step.check.kind, truth=f(truth), estimate=f(estimate),
                       std_error=f(std_error), passed=bool(passed), details=details or {})


# ---------- Groups ----------

def _group_axioms(step: PlanStep, ctx: RunContext) -> CheckResult:
    c = step.check
    rep = check_axioms(step.group, samples=c.samples, seed=c.seed, tol=c.tol)
    worst = max(rep.associativity, rep.identity, rep.inverse, rep.automorphism)
    return _result(step, rep.passed, 0.0, worst, details=rep.model_dump())


def _group_fields(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, g = step.check, step.group
    fr = group_frame(g)
    rep = check_invariance_homogeneity(g, fr, samples=c.samples, seed=c.seed, tol=c.tol)
    depth = max(c.depth, g.depth + 1)
    pts = stream(c.seed, 30).standard_normal((c.samples, g.dim))
    ranks = [hormander_rank(fr, p, depth) for p in pts]
    brackets = {f"[{a},{b}]": field_to_sparse(v) for (a, b), v in bracket_table(fr).items() if not v.is_zero()}
    passed = rep.passed and min(ranks) == g.dim
    return _result(step, passed, g.dim, min(ranks), details={
        "invariance": rep.invariance, "homogeneity": rep.homogeneity,
        "stratification_depth": stratification_depth(fr), "brackets": brackets,
    })


# ---------- Fundamental solution ----------

def _normalization(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    errs = [normalization_error(op, c.pole, s, c.order) for s in c.times]
    return _result(step, max(errs) <= c.tol, 0.0, max(errs), details={"errors": errs})


def _points_below(op, pole: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Seeded points (ξ, t₀−s), ξ one standard deviation deep in Γ*(·, t₀−s; pole)."""
    rng = stream(seed, 31)
    s = rng.uniform(0.1, 1.0, n)
    y = rng.standard_normal((n, op.N))
    pts = np.empty((n, op.dim))
    for i in range(n):
        Einv = expm_nilpotent(op.kspec, -s[i])
        mean = Einv @ (pole[:-1] + s[i] * op.b_ext)
        L = np.linalg.cholesky(Einv @ (2.0 * op.kernel_cov(s[i])) @ Einv.T)
        pts[i, :-1] = mean + L @ y[i]
        pts[i, -1] = pole[-1] - s[i]
    return pts


def _pde_residual(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    pole = np.asarray(c.pole, dtype=float)
    pts = _points_below(op, pole, c.samples, c.seed)
    u = lambda z: gamma_eval(op, z, pole, grad=False).value
    res = np.asarray(pde_residual(op, u, pts, h=c.h, adjoint=True, domain=below_pole(pole), relative=True))
    worst = float(res.max())
    return _result(step, worst <= c.tol, 0.0, worst, details={"mean": float(res.mean())})


def _homogeneity(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    rng = stream(c.seed, 32)
    t = rng.uniform(0.2, 2.0, c.samples)
    x = rng.standard_normal((c.samples, op.N)) * op.scale_vector(t)
    z = np.column_stack([x, t])
    worst = max(float(np.max(homogeneity_residual(op, z, lam))) for lam in c.lambdas)
    return _result(step, worst <= c.tol, 0.0, worst, details={"lambdas": c.lambdas})


def _chapman_kolmogorov(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    n = max(32, int(round(c.samples * ctx.samples_scale)))
    est, truth = chapman_kolmogorov(op, c.pole, c.point, c.sigma, n, c.seed)
    passed = est.within(truth, 1e-2 * abs(truth))
    return _result(step, passed, truth, est.value, est.std_error, details={"n": est.n_effective})


# ---------- Level sets and mean value formulas ----------

def _claim2(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    ball = envelope(op, c.pole, c.r)
    s_star = measure_peak(ball)
    ladder = [2.0 ** -k for k in range(c.k_min, c.k_max + 1) if 2.0 ** -k < s_star]
    if len(ladder) < 2:
        logger.warning(f"[check] {c.id}: only {len(ladder)} rung(s) below s*={s_star:.3g}, decay is untested")
    rep = claim2_decay(op, c.pole, c.r, ladder + [c.final_eps])
    if ctx.out_dir:
        write_rows_csv(ctx.path(f"{c.id}_decay.csv"), rep.rows(), ["eps", "slice_measure", "tail_integral"])
    worst = max(rep.final_measure, rep.final_tail)
    passed = len(ladder) >= 2 and rep.monotone and worst <= c.tol
    return _result(step, passed, 0.0, worst,
                   details={"s_star": s_star, "rungs": len(ladder), "time_extent": ball.time_extent,
                            **rep.model_dump()})


def _kernel_normalization(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    ball = envelope(op, c.pole, c.r)
    if c.levelset_points and ctx.out_dir:
        pts = ball.sphere_points(c.levelset_points, c.mc.seed if c.mc else 0)
        names = [f"x{i + 1}" for i in range(op.N)] + ["t"]
        write_rows_csv(ctx.path(f"{c.id}_levelset.csv"), [dict(zip(names, p)) for p in pts], names)
    pref = (c.alpha - 1.0) / c.r ** (c.alpha - 1.0)
    if c.method == "quadrature":
        value = pref * kernel_mass(ball, c.alpha)
        return _result(step, abs(value - 1.0) <= c.abs_tol, 1.0, value, 0.0, details={"method": c.method})
    cfg = c.mc.config(ctx.threads, ctx.samples_scale)
    if c.method == "surface":
        est = surface_via_derivative(ball, lambda p: np.ones(len(p)), cfg)
    else:
        est = mc_kernel_integral(ball, None, cfg, c.alpha, term=1).scaled(pref)
    passed = est.within(1.0, c.abs_tol) and not est.flagged
    return _result(step, passed, 1.0, est.value, est.std_error, details={"method": c.method, **est.model_dump()})


def _mvf(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    sol = solution_from_id(op, c.solution)
    pole = np.asarray(c.pole, dtype=float)
    ball = envelope(op, pole, c.r)
    sol.check_admissible(ball)
    k = KernelEval(op, pole, c.alpha)
    cfg = c.mc.config(ctx.threads, ctx.samples_scale)
    truth = sol.truth(pole)
    if c.kind == "mvf_volume":
        tol = 1e-3 if c.abs_tol is None else c.abs_tol
        rep = volume_formula_rhs(k, sol.u, sol.f, ball, cfg, abs_tol=tol, truth=truth)
    else:
        tol = 1e-2 if c.abs_tol is None else c.abs_tol
        rep = surface_formula_rhs(k, sol.u, sol.f, ball, cfg, abs_tol=tol, truth=truth)
    return _result(step, rep.passed, truth, rep.estimate.value, rep.estimate.std_error, details=rep.model_dump())


def _divergence(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    res = []
    for p in range(c.pairs):
        u = random_polynomial(op.dim, c.degree, c.seed, key=2 * p)
        v = random_polynomial(op.dim, c.degree, c.seed, key=2 * p + 1)
        res.append(divergence_identity_residual(op, u, v, seed=c.seed))
    return _result(step, max(res) <= c.tol, 0.0, max(res), details={"pairs": c.pairs})


def _reproduction(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    rep = reproduction_limit(op, bump_from_id(c.phi), c.xi, c.eps, c.order)
    return _result(step, rep.final <= c.tol, 0.0, rep.final, details=rep.model_dump())


# ---------- Reachability ----------

def _reach_cone(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    rep, sample = cone_experiment(op, c.R, c.n, c.seed, cells=c.cells, steer=c.steer, workers=ctx.threads)
    if ctx.out_dir:
        write_rows_csv(ctx.path(f"{c.id}_endpoints.csv"), sample.rows())
    passed = rep.violations == 0 and (not c.steer or rep.coverage >= c.min_coverage)
    return _result(step, passed, 0.0, rep.violations, details=rep.model_dump())


def _steering(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    rng = stream(c.seed, 33)
    z0 = np.zeros(op.dim)
    worst = 0.0
    for _ in range(c.targets):
        s = rng.uniform(0.1, 1.0)
        target = np.append(0.5 * rng.standard_normal(op.N) * op.scale_vector(s), -s)
        path = steer_min_energy(op, z0, target, c.steps, tol=c.tol)
        worst = max(worst, float(np.max(np.abs(integrate_curve(op, z0, path) - target))))
    return _result(step, worst <= c.tol, 0.0, worst, details={"targets": c.targets})


def _h4(step: PlanStep, ctx: RunContext) -> CheckResult:
    c, op = step.check, step.op
    path = steer_min_energy(op, c.start, c.target, c.steps)
    rep = check_H4(op, c.start, c.r, path, c.s_ladder)
    return _result(step, rep.passed, 0.0, rep.ratio_decay, details=rep.model_dump())


CHECKS: Dict[str, Callable[[PlanStep, RunContext], CheckResult]] = {
    "group_axioms": _group_axioms,
    "group_fields": _group_fields,
    "normalization": _normalization,
    "pde_residual": _pde_residual,
    "homogeneity": _homogeneity,
    "chapman_kolmogorov": _chapman_kolmogorov,
    "claim2_decay": _claim2,
    "kernel_normalization": _kernel_normalization,
    "mvf_volume": _mvf,
    "mvf_surface": _mvf,
    "divergence_identity": _divergence,
    "reproduction_limit": _reproduction,
    "reach_cone": _reach_cone,
    "steering": _steering,
    "h4": _h4,
}


def run_check(step: PlanStep, ctx: RunContext) -> CheckResult:
    logger.info(f"[check] {step.check.id} ({step.check.kind})")
    result = CHECKS[step.check.kind](step, ctx)
    logger.info(f"[check] {result.id}: {'pass' if result.passed else 'FAIL'} estimate={result.estimate}")
    return result
