# mvf/kernels/geometry.py
"""
Superlevel sets Ω_r(z₀) = {Γ*(·; z₀) > 1/r} of the exact kernels.

On the slice τ = t₀ − s the condition Γ* > 1/r reads
⟨K(s)⁻¹w, w⟩ < R(s)² with R(s)² = 4 log(r·g(s)), g(s) the slice maximum of
Γ*, so every slice is an open ellipsoid in ξ and all slice quantities
(measure, Gaussian mass outside it, bounding box) are closed form.

Public API:
    LevelBall, envelope, membership, claim2_decay, DecayReport,
    slice_tail, measure_peak
"""

from __future__ import annotations
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import optimize, special, stats

from mvf.config.settings import TIME_HORIZON
from mvf.errors import ConvergenceError, DomainError, HorizonError
from mvf.kernels.kolmo import OperatorSpec, expm_nilpotent, gamma_eval
from mvf.utils.logger import logger
from mvf.utils.rng import stream


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / special.gamma(n / 2.0 + 1.0)


def _solve_time_extent(op: OperatorSpec, r: float, horizon: float) -> float:
    """Root of log r + log g(s) = 0; log g is strictly decreasing in s."""
    phi = lambda s: math.log(r) + float(op.log_peak(s))
    if op.c == 0.0:
        # closed form seed: det K(s) = s^{psum} det K(1)
        lo = math.exp((2.0 * math.log(r) - op.N * math.log(4.0 * math.pi) - op.logdet_K1) / op.psum)
    else:
        lo = 1.0
    hi = lo
    while phi(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ConvergenceError("time-extent bracket", 0, lo)
    while phi(hi) > 0.0:
        hi *= 2.0
        if hi > horizon:
            raise HorizonError(horizon, r)
    root = lo if lo == hi else float(optimize.bisect(phi, lo, hi, xtol=1e-300, rtol=1e-12, maxiter=2000))
    if root > horizon:
        raise HorizonError(horizon, r)
    return root


@dataclass(frozen=True, eq=False)
class LevelBall:
    op: OperatorSpec
    pole: np.ndarray
    r: float
    time_extent: float
    r0: float = math.inf

    # ---------- slice quantities, s = t₀ − τ ∈ (0, Δ) ----------

    @property
    def t0(self) -> float:
        return float(self.pole[-1])

    @property
    def x0(self) -> np.ndarray:
        return self.pole[:-1]

    @property
    def N(self) -> int:
        return self.op.N

    def log_g(self, s: Any) -> np.ndarray:
        return self.op.log_peak(s)

    def radius2(self, s: Any) -> np.ndarray:
        """R(s)² = 4 log(r g(s)), clipped at 0 outside (0, Δ)."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 4.0 * (math.log(self.r) + self.log_g(np.where(s > 0, s, 1.0)))
        return np.where((s > 0) & (s < self.time_extent), np.maximum(val, 0.0), 0.0)

    def center(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        Einv = expm_nilpotent(self.op.kspec, -s)
        shifted = self.x0 + s[..., None] * self.op.b_ext
        return np.einsum("...ij,...j->...i", Einv, shifted)

    def factor(self, s: Any) -> np.ndarray:
        """F(s) = E(−s) D_s L₁ with K(1) = L₁L₁ᵀ: the slice is center + R·F·(unit ball)."""
        s = np.asarray(s, dtype=float)
        Einv = expm_nilpotent(self.op.kspec, -s)
        d = self.op.scale_vector(s)
        return (Einv * d[..., None, :]) @ self.op.K1_chol

    def slice_measure(self, s: Any) -> np.ndarray:
        """Lebesgue measure of the slice: ω_N R^N √det K(s)."""
        s = np.asarray(s, dtype=float)
        R2 = self.radius2(s)
        safe = np.where(R2 > 0, s, 1.0)
        out = unit_ball_volume(self.N) * np.power(R2, 0.5 * self.N) * np.exp(0.5 * self.op.logdet_kernel_cov(safe))
        return np.where(R2 > 0, out, 0.0)

    def box(self, s: Any) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of the slice ellipsoid."""
        F = self.factor(s)
        half = np.sqrt(self.radius2(s))[..., None] * np.linalg.norm(F, axis=-1)
        c = self.center(s)
        return c - half, c + half

    def in_envelope(self, z: Any) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        s = self.t0 - z[..., -1]
        inside_t = (s > 0) & (s < self.time_extent)
        lo, hi = self.box(np.where(inside_t, s, 0.5 * self.time_extent))
        x = z[..., :-1]
        return inside_t & np.all((x >= lo) & (x <= hi), axis=-1)

    def tail(self, s: Any) -> np.ndarray:
        return slice_tail(self, s)

    def map_unit(self, s: Any, y: np.ndarray) -> np.ndarray:
        """Points (ξ, t₀−s) for y in the closed unit ball."""
        s = np.asarray(s, dtype=float)
        F = self.factor(s)
        R = np.sqrt(self.radius2(s))
        xi = self.center(s) + R[..., None] * np.einsum("...ij,...j->...i", F, y)
        return np.concatenate([xi, (self.t0 - s)[..., None]], axis=-1)

    def with_r(self, r: float) -> "LevelBall":
        return envelope(self.op, self.pole, r)

    @cached_property
    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Union of slice boxes over a fine grid in s, inflated by 1%."""
        s = self.time_extent * np.linspace(1e-6, 1.0 - 1e-6, 2049)
        lo, hi = self.box(s)
        lo, hi = lo.min(axis=0), hi.max(axis=0)
        pad = 0.01 * (hi - lo)
        return lo - pad, hi + pad

    def sphere_points(self, n: int, seed: int) -> np.ndarray:
        """Seeded points on ψ_r, uniform in s and in direction (plot data only)."""
        rng = stream(seed, 7)
        s = self.time_extent * rng.uniform(1e-6, 1.0, size=n)
        g = rng.standard_normal((n, self.N))
        y = g / np.linalg.norm(g, axis=1, keepdims=True)
        return self.map_unit(s, y)


def envelope(op: OperatorSpec, pole: Any, r: float, horizon: float = TIME_HORIZON) -> LevelBall:
    pole = np.asarray(pole, dtype=float)
    if pole.shape != (op.dim,):
        raise DomainError("pole", pole.tolist(), f"need a point of length {op.dim}")
    if not np.isfinite(r) or r <= 0:
        raise DomainError("r", r, "need r > 0")
    delta = _solve_time_extent(op, float(r), horizon)
    logger.debug(f"[geometry] r={r} Δ={delta:.12g}")
    return LevelBall(op=op, pole=pole, r=float(r), time_extent=delta)


Which = Literal["interior", "sphere_band", "slice"]


def membership(
    ball: LevelBall, z: Any, which: Which = "interior", delta: float = 1e-6, eps: float | None = None,
) -> np.ndarray | bool:
    z = np.asarray(z, dtype=float)
    gam = gamma_eval(ball.op, z, ball.pole, grad=False).value
    below = z[..., -1] < ball.t0
    if which == "interior":
        out = below & (gam * ball.r > 1.0)
    elif which == "sphere_band":
        out = below & (np.abs(gam - 1.0 / ball.r) <= delta / ball.r)
    elif which == "slice":
        if eps is None:
            raise DomainError("eps", eps, "slice membership needs eps")
        on_slice = np.isclose(z[..., -1], ball.t0 - eps, rtol=0.0, atol=1e-15 * max(1.0, abs(ball.t0)))
        out = on_slice & below & (gam * ball.r > 1.0)
    else:
        raise DomainError("which", which, "expected interior, sphere_band or slice")
    return bool(out) if np.ndim(out) == 0 else out


def slice_tail(ball: LevelBall, s: Any) -> np.ndarray:
    """
    ∫_{R^N ∖ I_{r,s}} Γ*(x, t₀−s; z₀) dx. On a slice w ~ N(0, 2K(s)) up to
    the factor e^{cs}, so ⟨K⁻¹w,w⟩/2 is χ²_N and the tail is
    e^{cs}·P(χ²_N ≥ R²/2).
    """
    s = np.asarray(s, dtype=float)
    R2 = ball.radius2(s)
    return np.exp(ball.op.c * s) * stats.chi2.sf(0.5 * R2, ball.N)


def measure_peak(ball: LevelBall) -> float:
    """s* maximising the slice measure on (0, Δ)."""
    D = ball.time_extent
    res = optimize.minimize_scalar(
        lambda u: -float(ball.slice_measure(D * u)), bounds=(1e-12, 1.0 - 1e-12),
        method="bounded", options={"xatol": 1e-12},
    )
    return float(D * res.x)


class DecayReport(BaseModel):
    r: float
    eps: List[float]
    slice_measure: List[float]
    tail_integral: List[float]
    monotone_measure: bool
    monotone_tail: bool
    final_measure: float
    final_tail: float

    @property
    def monotone(self) -> bool:
        return self.monotone_measure and self.monotone_tail

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"eps": e, "slice_measure": m, "tail_integral": t}
            for e, m, t in zip(self.eps, self.slice_measure, self.tail_integral)
        ]


def _strictly_decreasing(vals: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def claim2_decay(op: OperatorSpec, pole: Any, r: float, eps_ladder: Sequence[float]) -> DecayReport:
    """Slice measure of I_{r,ε} and the Gaussian tail outside it along a decreasing ε ladder."""
    eps = [float(e) for e in eps_ladder]
    if any(e <= 0 for e in eps):
        raise DomainError("eps_ladder", eps, "entries must be positive")
    ball = envelope(op, pole, r)
    arr = np.asarray(eps)
    meas = ball.slice_measure(arr)
    tail = np.where(arr < ball.time_extent, slice_tail(ball, arr), np.exp(op.c * arr))
    report = DecayReport(
        r=float(r), eps=eps,
        slice_measure=[float(v) for v in meas],
        tail_integral=[float(v) for v in tail],
        monotone_measure=_strictly_decreasing(list(meas)),
        monotone_tail=_strictly_decreasing(list(tail)),
        final_measure=float(meas[-1]),
        final_tail=float(tail[-1]),
    )
    logger.info(
        f"[decay] r={r} measure {'↓' if report.monotone_measure else '≁'} tail "
        f"{'↓' if report.monotone_tail else '≁'} final=({report.final_measure:.3e}, {report.final_tail:.3e})"
    )
    return report
