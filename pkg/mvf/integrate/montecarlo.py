# mvf/integrate/montecarlo.py
"""
Seeded Monte-Carlo integration over Ω_r(z₀).

A draw picks the slice time s from a tabulated density proportional to
slice_measure(s)·w(s) (w an optional nonnegative time weight), then a point
uniform in that slice's ellipsoid. The estimator
slice_measure(s)·F(z)/p(s) is unbiased for ∫_{Ω_r} F; time is stratified
into equal-probability strata and draws are grouped into batches whose
spread gives std_error.

Streams are keyed (term, stratum, batch), so results do not depend on the
number of workers.

Public API:
    TimeProposal, build_time_proposal, slice_kernel_mean, time_quadrature,
    kernel_mass, mc_volume_integral, mc_kernel_integral,
    surface_via_derivative
"""

from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate

from mvf.errors import DomainError, NonFiniteError
from mvf.integrate.estimate import Estimate, MCConfig
from mvf.kernels.geometry import LevelBall
from mvf.kernels.kolmo import expm_nilpotent, mv_kernels
from mvf.utils.logger import logger
from mvf.utils.rng import stream

Integrand = Callable[[np.ndarray], np.ndarray]
TimeWeight = Callable[[np.ndarray], np.ndarray]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
RADIAL_NODES = 0.5 * (_GL_NODES + 1.0)
RADIAL_WEIGHTS = 0.5 * _GL_WEIGHTS


# ---------- Time proposal ----------

@dataclass(frozen=True)
class TimeProposal:
    edges: np.ndarray     # cell edges in s, increasing, from the guard to Δ
    prob: np.ndarray      # cell probabilities, sum 1
    cdf: np.ndarray       # len(edges), cdf[0] = 0
    guard: float

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def sample(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Inverse CDF of the piecewise-constant density: (s, p(s))."""
        k = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.prob) - 1)
        # cells of zero mass are never selected: searchsorted skips flat cdf runs
        frac = np.clip((u - self.cdf[k]) / np.where(self.prob[k] > 0, self.prob[k], 1.0), 0.0, 1.0)
        w = self.widths[k]
        s = self.edges[k] + frac * w
        return s, self.prob[k] / w


def _unit_grid(guard_rel: float, cells: int) -> np.ndarray:
    """Edges in s/Δ: geometric towards 0 and towards 1, meeting at 1/2."""
    half = cells // 2
    lo = max(guard_rel, 1e-300)
    left = np.geomspace(lo, 0.5, half + 1)
    right = 1.0 - np.geomspace(0.5, 1e-13, half + 1)
    return np.unique(np.concatenate([left, right, [1.0]]))


def build_time_proposal(ball: LevelBall, weight: Optional[TimeWeight], guard_rel: float, cells: int) -> TimeProposal:
    D = ball.time_extent
    edges = D * _unit_grid(guard_rel, cells)
    mid = 0.5 * (edges[1:] + edges[:-1])
    dens = ball.slice_measure(mid)
    if weight is not None:
        dens = dens * np.asarray(weight(mid), dtype=float)
    mass = np.maximum(dens, 0.0) * np.diff(edges)
    total = mass.sum()
    if not np.isfinite(total) or total <= 0:
        raise DomainError("time proposal", float(total), "slice mass vanishes on Ω_r")
    prob = mass / total
    cdf = np.concatenate([[0.0], np.cumsum(prob)])
    cdf[-1] = 1.0
    return TimeProposal(edges=edges, prob=prob, cdf=cdf, guard=float(edges[0]) if guard_rel > 0 else 0.0)


# ---------- Analytic slice weights ----------

def slice_kernel_mean(ball: LevelBall, alpha: float = 2.0) -> TimeWeight:
    """
    s ↦ mean of M_α over the slice ellipsoid at t₀ − s. With ξ = c + R F y:
        ¼ (R²/N) tr(A [E(s)ᵀK(s)⁻¹E(s)]₀₀) ∫₀¹ Nρ^{N+1} (g e^{−R²ρ²/4})^{2−α} dρ,
    the last factor equal to N/(N+2) at α = 2.
    """
    op = ball.op
    N, m0 = op.N, op.kspec.m0
    K1inv = np.linalg.inv(op.K1)

    def mean(s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        R2 = ball.radius2(s)
        safe = np.where(R2 > 0, s, 1.0)
        E = expm_nilpotent(op.kspec, safe)
        d = op.scale_vector(safe)
        Kinv = K1inv[None] / (d[:, :, None] * d[:, None, :])
        H = np.einsum("nki,nkl,nlj->nij", E, Kinv, E)[:, :m0, :m0]
        tr = np.einsum("ij,nji->n", op.A, H)
        logg = ball.log_g(safe)
        expo = (2.0 - alpha) * (logg[:, None] - 0.25 * R2[:, None] * RADIAL_NODES[None] ** 2)
        G = np.sum(RADIAL_WEIGHTS * N * RADIAL_NODES ** (N + 1) * np.exp(expo), axis=1)
        return np.where(R2 > 0, 0.25 * R2 / N * tr * G, 0.0)

    return mean


def time_quadrature(ball: LevelBall, weight: Optional[TimeWeight] = None) -> float:
    """∫₀^Δ slice_measure(s)·w(s) ds by adaptive quadrature (log-substituted near the pole)."""
    D = ball.time_extent

    def f(s: float) -> float:
        val = float(ball.slice_measure(s))
        if weight is not None and val > 0:
            val *= float(np.asarray(weight(np.array([s])))[0])
        return val

    near, _ = integrate.quad(lambda v: f(D * math.exp(v)) * D * math.exp(v), math.log(1e-30), math.log(0.5),
                             limit=400, epsabs=0.0, epsrel=1e-11)
    far, _ = integrate.quad(f, 0.5 * D, D, limit=400, epsabs=0.0, epsrel=1e-11)
    return near + far


def kernel_mass(ball: LevelBall, alpha: float = 2.0) -> float:
    """∫_{Ω_r} M_α dz, deterministic; (α−1)/r^{α−1} times it is 1."""
    return time_quadrature(ball, slice_kernel_mean(ball, alpha))


# ---------- Estimators ----------

def _unit_ball(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    g = rng.standard_normal((n, N))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random(n)[:, None] ** (1.0 / N)


def _checked(vals: np.ndarray, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(vals, dtype=float).reshape(len(pts))
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise NonFiniteError("integrand sample", pts[bad][0])
    return vals


@dataclass(frozen=True)
class _BatchRun:
    values: np.ndarray
    n: int
    guard_bound: float


def _run_batches(
    ball: LevelBall, integrand: Integrand, cfg: MCConfig, weight: Optional[TimeWeight], term: int,
) -> _BatchRun:
    prop = build_time_proposal(ball, weight, cfg.guard_rel, cfg.grid_points)
    S, B, N = cfg.stratify_slices, cfg.batches, ball.N
    per = max(1, cfg.samples // (B * S))
    if cfg.antithetic:
        per = max(1, per // 2)

    def one(b: int) -> Tuple[float, float, int]:
        total, ratio, evals = 0.0, 0.0, 0
        for k in range(S):
            rng = stream(cfg.seed, term, k, b)
            u = (k + rng.random(per)) / S
            s, dens = prop.sample(u)
            y = _unit_ball(rng, per, N)
            pts = ball.map_unit(s, y)
            vals = _checked(integrand(pts), pts)
            evals += per
            if cfg.antithetic:
                mirror = ball.map_unit(s, -y)
                vals = 0.5 * (vals + _checked(integrand(mirror), mirror))
                evals += per
            total += float(np.mean(ball.slice_measure(s) * vals / dens)) / S
            if k == 0:
                w = np.asarray(weight(s), dtype=float) if weight is not None else np.ones_like(s)
                r = np.abs(vals) / np.where(w > 0, w, np.inf)
                ratio = float(np.max(r)) if r.size else 0.0
        return total, ratio, evals

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(one, range(B)))
    else:
        out = [one(b) for b in range(B)]

    values = np.array([o[0] for o in out])
    ratio = max(o[1] for o in out)
    n = sum(o[2] for o in out)
    return _BatchRun(values=values, n=n, guard_bound=_guard_bound(ball, weight, prop.guard, ratio))


def _guard_bound(ball: LevelBall, weight: Optional[TimeWeight], eps: float, ratio: float) -> float:
    """
    Bound on ∫_0^ε slice_measure·|F| ds, with |F| ≤ ratio·w near the pole and
    slice_measure·w ~ s^a fitted from its values at ε and 2ε.
    """
    if eps <= 0.0 or ratio == 0.0:
        return 0.0

    def h(s: float) -> float:
        val = float(ball.slice_measure(s))
        if weight is not None:
            val *= float(np.asarray(weight(np.array([s])))[0])
        return val

    h1, h2 = h(eps), h(2.0 * eps)
    if h1 <= 0.0:
        return 0.0
    a = math.log(h2 / h1) / math.log(2.0) if h2 > 0 else 0.0
    if a <= -1.0:
        return math.inf
    return ratio * eps * h1 / (a + 1.0)


def _finish(run: _BatchRun, cfg: MCConfig, note: str | None = None) -> Estimate:
    vals = run.values
    spread = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return Estimate(
        value=float(np.mean(vals)),
        std_error=spread + run.guard_bound,
        n_effective=run.n,
        seed=cfg.seed,
        guard_bound=run.guard_bound,
        note=note,
    )


def mc_volume_integral(
    ball: LevelBall, integrand: Integrand, cfg: MCConfig, weight: Optional[TimeWeight] = None, term: int = 0,
) -> Estimate:
    """Unbiased estimate of ∫_{Ω_r} integrand dz."""
    run = _run_batches(ball, integrand, cfg, weight, term)
    est = _finish(run, cfg)
    logger.debug(f"[mc] term={term} r={ball.r} value={est.value:.6g} ± {est.std_error:.2e} (n={est.n_effective})")
    return est


def kernel_integrand(ball: LevelBall, u: Optional[Integrand], alpha: float = 2.0) -> Integrand:
    op, pole = ball.op, ball.pole

    def F(pts: np.ndarray) -> np.ndarray:
        M = mv_kernels(op, pole, pts, alpha)[1]
        return M if u is None else M * np.asarray(u(pts), dtype=float)

    return F


def mc_kernel_integral(
    ball: LevelBall, u: Optional[Integrand], cfg: MCConfig, alpha: float = 2.0, term: int = 0,
) -> Estimate:
    """∫_{Ω_r} M_α u dz with the analytic slice mean of M_α as time weight."""
    return mc_volume_integral(ball, kernel_integrand(ball, u, alpha), cfg, slice_kernel_mean(ball, alpha), term)


def _near_constant(ball: LevelBall, u: Integrand, seed: int) -> bool:
    pts = ball.sphere_points(64, seed)
    vals = np.asarray(u(pts), dtype=float)
    return float(np.ptp(vals)) <= 1e-9 * (1.0 + float(np.max(np.abs(vals))))


def surface_via_derivative(
    ball: LevelBall, u: Integrand, cfg: MCConfig, h_rel: float = 0.05, richardson: bool = True, term: int = 10,
) -> Estimate:
    """
    ∫_{ψ_r} K u dS as F'(r), F(ϱ) = ∫_{Ω_ϱ} M u dz, by a central difference at
    r(1 ± h) with common random numbers, then one Richardson step with h/2.
    """
    if not (0.0 < h_rel <= 0.1):
        raise DomainError("h_rel", h_rel, "need 0 < h_rel ≤ 0.1")
    r = ball.r

    def central(h: float) -> Tuple[np.ndarray, float, int]:
        up = ball.with_r(r * (1.0 + h))
        dn = ball.with_r(r * (1.0 - h))
        a = _run_batches(up, kernel_integrand(up, u), cfg, slice_kernel_mean(up), term)
        b = _run_batches(dn, kernel_integrand(dn, u), cfg, slice_kernel_mean(dn), term)
        scale = 1.0 / (2.0 * r * h)
        return (a.values - b.values) * scale, (a.guard_bound + b.guard_bound) * scale, a.n + b.n

    d1, g1, n1 = central(h_rel)
    if richardson:
        d2, g2, n2 = central(0.5 * h_rel)
        vals, guard, n = (4.0 * d2 - d1) / 3.0, (4.0 * g2 + g1) / 3.0, n1 + n2
    else:
        vals, guard, n = d1, g1, n1

    est = _finish(_BatchRun(values=vals, n=n, guard_bound=guard), cfg)
    if est.std_error > abs(est.value) and not _near_constant(ball, u, cfg.seed):
        logger.warning(f"[surface] r={r}: difference dominated by noise ({est.value:.3e} ± {est.std_error:.3e})")
        est = est.model_copy(update={"flagged": True, "note": "noise-dominated derivative"})
    return est
