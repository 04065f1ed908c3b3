# mvf/reach/control.py
"""
ℒ-admissible curves of Kolmogorov frames and what they reach.

An admissible curve from z₀ solves
    ẋ = Bx + Jω,  ṫ = −1,
for a control ω ∈ L² with values in the first layer. With ω piecewise
constant each interval is solved exactly:
    x(h) = e^{hB} x + P(h) Gω,  P(h) = ∫_0^h e^{uB} du,
where e^{hB} = E(−h) and G embeds R^{m0} as the first block.

Public API:
    ControlPath, ReachSample, H4Report, ConeReport, integrate_curve,
    curve_point, first_exit, sample_attainable, gramian,
    continuous_min_energy, steer_min_energy, steer_in_domain, check_H4,
    cone_experiment
"""

from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import interpolate

from mvf.errors import CurveExitError, DimensionError, DomainError, SteeringError
from mvf.kernels.kolmo import KolmogorovSpec, OperatorSpec, expm_nilpotent, gamma_eval
from mvf.utils.logger import logger
from mvf.utils.rng import stream

Box = Tuple[np.ndarray, np.ndarray]


# ---------- Controls ----------

@dataclass(frozen=True, eq=False)
class ControlPath:
    breakpoints: np.ndarray     # 0 = σ_0 < σ_1 < ... < σ_k = T
    omega: np.ndarray           # (k, m0), constant on [σ_i, σ_{i+1})

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=float)
        om = np.atleast_2d(np.asarray(self.omega, dtype=float))
        if bp.ndim != 1 or bp.size < 1 or bp[0] != 0.0:
            raise DomainError("breakpoints", bp.tolist(), "need a 1-D sequence starting at 0")
        if np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints", bp.tolist(), "breakpoints must increase")
        if bp.size == 1:
            om = om.reshape(0, om.shape[-1])
        if om.shape[0] != bp.size - 1:
            raise DimensionError("omega rows", bp.size - 1, om.shape[0])
        if not np.all(np.isfinite(om)):
            raise DomainError("omega", om.tolist(), "controls must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "omega", om)

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def m0(self) -> int:
        return self.omega.shape[1]

    @property
    def energy(self) -> float:
        """∫|ω|², exact for piecewise constant controls."""
        return float(np.sum(np.sum(self.omega ** 2, axis=1) * self.widths))

    def l1_upto(self, s: float) -> float:
        """∫_0^s |ω|."""
        lo, hi = self.breakpoints[:-1], self.breakpoints[1:]
        overlap = np.clip(np.minimum(hi, s) - lo, 0.0, None)
        return float(np.sum(np.linalg.norm(self.omega, axis=1) * overlap))

    def then(self, other: "ControlPath") -> "ControlPath":
        return ControlPath(
            breakpoints=np.concatenate([self.breakpoints, self.duration + other.breakpoints[1:]]),
            omega=np.concatenate([self.omega, other.omega]),
        )

    @classmethod
    def constant(cls, omega: Sequence[float], T: float, steps: int = 1) -> "ControlPath":
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        return cls(np.linspace(0.0, T, steps + 1), np.tile(w, (steps, 1)))

    @classmethod
    def idle(cls, m0: int, T: float) -> "ControlPath":
        return cls.constant(np.zeros(m0), T)

    @classmethod
    def from_function(cls, fn: Callable[[float], Any], T: float, steps: int) -> "ControlPath":
        """Interval averages of ω(σ) by 3-point Gauss–Legendre."""
        bp = np.linspace(0.0, T, steps + 1)
        x, w = np.polynomial.legendre.leggauss(3)
        rows = []
        for a, b in zip(bp[:-1], bp[1:]):
            nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
            vals = np.array([np.atleast_1d(np.asarray(fn(s), dtype=float)) for s in nodes])
            rows.append(0.5 * w @ vals)
        return cls(bp, np.array(rows))


# ---------- Exact flow ----------

def _flow_integral(k: KolmogorovSpec, h: Any) -> np.ndarray:
    """P(h) = ∫_0^h e^{uB} du = Σ_i (−1)^i M_i h^{i+1}/(i+1)."""
    h = np.asarray(h, dtype=float)
    i = np.arange(k.kappa + 1, dtype=float)
    coef = (-1.0) ** i * np.power(h[..., None], i + 1.0) / (i + 1.0)
    return np.tensordot(coef, k.expm_terms, axes=([-1], [0]))


def _advance(k: KolmogorovSpec, x: np.ndarray, h: Any, w: np.ndarray) -> np.ndarray:
    """x after time h under the constant control w; h may be an array."""
    m0 = k.m0
    Ph = _flow_integral(k, h)[..., :, :m0]
    return np.einsum("...ij,j->...i", expm_nilpotent(k, -np.asarray(h, dtype=float)), x) \
        + np.einsum("...ij,j->...i", Ph, w)


def _rk4(op: OperatorSpec, x: np.ndarray, h: float, w: np.ndarray, steps: int) -> np.ndarray:
    B = op.kspec.B
    push = np.zeros(op.N)
    push[: op.kspec.m0] = w
    f = lambda y: B @ y + push
    dt = h / steps
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _check_start(op: OperatorSpec, z0: Any, path: Optional[ControlPath] = None) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (op.dim,):
        raise DimensionError("z0", op.dim, z0.size)
    if path is not None and path.m0 != op.kspec.m0:
        raise DimensionError("control", op.kspec.m0, path.m0)
    return z0


def as_box(domain: Any, dim: int) -> Box:
    lo, hi = (np.asarray(v, dtype=float) for v in domain)
    if lo.shape != (dim,) or hi.shape != (dim,):
        raise DimensionError("domain box", dim, lo.size)
    if np.any(lo >= hi):
        raise DomainError("domain", [lo.tolist(), hi.tolist()], "need lo < hi")
    return lo, hi


def _inside(box: Box, pts: np.ndarray) -> np.ndarray:
    lo, hi = box
    return np.all((pts > lo) & (pts < hi), axis=-1)


def first_exit(
    op: OperatorSpec, z0: Any, path: ControlPath, domain: Any, per_interval: int = 16,
) -> Optional[Tuple[float, np.ndarray]]:
    """(exit time, last inside point) of the first exit from the open box, or None."""
    z0 = _check_start(op, z0, path)
    box = as_box(domain, op.dim)
    if not _inside(box, z0):
        return 0.0, z0
    k = op.kspec
    x, t, s0 = z0[:-1].copy(), z0[-1], 0.0
    for h, w in zip(path.widths, path.omega):
        hs = h * np.arange(1, per_interval + 1) / per_interval
        pts = np.concatenate([_advance(k, x, hs, w), (t - s0 - hs)[:, None]], axis=1)
        ok = _inside(box, pts)
        if not ok.all():
            j = int(np.argmin(ok))
            a, b = (hs[j - 1] if j else 0.0), hs[j]
            for _ in range(60):
                mid = 0.5 * (a + b)
                p = np.append(_advance(k, x, mid, w), t - s0 - mid)
                a, b = (mid, b) if _inside(box, p) else (a, mid)
            return s0 + a, np.append(_advance(k, x, a, w), t - s0 - a)
        x, s0 = pts[-1, :-1], s0 + h
    return None


def integrate_curve(
    op: OperatorSpec,
    z0: Any,
    path: ControlPath,
    method: Literal["exact", "rk4"] = "exact",
    domain: Any = None,
    rk4_steps: int = 32,
) -> np.ndarray:
    """Endpoint of the admissible curve driven by `path` from z0."""
    z0 = _check_start(op, z0, path)
    if domain is not None:
        hit = first_exit(op, z0, path, domain)
        if hit is not None:
            raise CurveExitError(hit[0], hit[1])
    x = z0[:-1].copy()
    for h, w in zip(path.widths, path.omega):
        x = _advance(op.kspec, x, h, w) if method == "exact" else _rk4(op, x, h, w, rk4_steps)
    return np.append(x, z0[-1] - path.duration)


def curve_point(op: OperatorSpec, z0: Any, path: ControlPath, s: Any) -> np.ndarray:
    """γ(s) for s in [0, T]; s may be an array."""
    z0 = _check_start(op, z0, path)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < 0) | (s > path.duration * (1 + 1e-12))):
        raise DomainError("s", s.tolist(), f"need 0 ≤ s ≤ {path.duration}")
    out = np.empty((s.size, op.dim))
    starts = [z0[:-1].copy()]
    for h, w in zip(path.widths, path.omega):
        starts.append(_advance(op.kspec, starts[-1], h, w))
    idx = np.clip(np.searchsorted(path.breakpoints, s, side="right") - 1, 0, max(len(path.widths) - 1, 0))
    for n, (si, i) in enumerate(zip(s, idx)):
        if not len(path.widths):
            out[n] = z0
            continue
        x = _advance(op.kspec, starts[i], si - path.breakpoints[i], path.omega[i])
        out[n] = np.append(x, z0[-1] - si)
    return out


# ---------- Attainable sets ----------

def relative_point(op: OperatorSpec, z0: np.ndarray, z: np.ndarray) -> np.ndarray:
    """z₀⁻¹ ∘ z: coordinates seen from z₀, where admissible curves start at 0."""
    x0, t0 = z0[:-1], z0[-1]
    s = z[..., -1] - t0
    x = z[..., :-1] - np.einsum("...ij,j->...i", expm_nilpotent(op.kspec, s), x0)
    return np.concatenate([x, s[..., None]], axis=-1)


@dataclass(frozen=True)
class ReachSample:
    endpoints: np.ndarray               # (n, dim)
    truncated: int                      # curves stopped at the domain boundary
    violations: int = 0
    inside_cone: Optional[np.ndarray] = None

    def rows(self) -> List[Dict[str, float]]:
        dim = self.endpoints.shape[1]
        names = [f"x{i + 1}" for i in range(dim - 1)] + ["t"]
        out = []
        for j, p in enumerate(self.endpoints):
            row = {n: float(v) for n, v in zip(names, p)}
            if self.inside_cone is not None:
                row["inside_cone"] = int(self.inside_cone[j])
            out.append(row)
        return out


def _random_path(rng: np.random.Generator, m0: int, T: float, pieces: int, omega_max: float, kind: str) -> ControlPath:
    if kind == "bang_bang":
        cuts = np.sort(rng.uniform(0.0, T, pieces - 1))
        bp = np.unique(np.concatenate([[0.0], cuts, [T]]))
        k = bp.size - 1
        mag = rng.uniform(0.0, omega_max, (k, 1))
        dirs = rng.standard_normal((k, m0))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return ControlPath(bp, mag * dirs)
    if kind == "spline":
        knots = np.linspace(0.0, T, pieces + 1)
        vals = rng.uniform(-omega_max, omega_max, (pieces + 1, m0)) / math.sqrt(m0)
        cs = interpolate.CubicSpline(knots, vals, axis=0)
        path = ControlPath.from_function(lambda s: cs(s), T, 4 * pieces)
        return ControlPath(path.breakpoints, np.clip(path.omega, -omega_max, omega_max))
    raise DomainError("kind", kind, "expected 'bang_bang' or 'spline'")


def sample_attainable(
    op: OperatorSpec,
    z0: Any,
    domain: Any,
    n: int,
    seed: int,
    omega_max: float = 0.5,
    T: Optional[float] = None,
    pieces: int = 8,
    kind: str = "bang_bang",
    cone_R: Optional[float] = None,
    workers: int = 1,
    chunk: int = 256,
) -> ReachSample:
    """
    Endpoints of n seeded random admissible curves from z0, each stopped where
    it first leaves the open box. Durations are uniform in (0, T_max), T_max
    the time to the lower t-face, unless T is given. With cone_R the
    endpoints are checked against |y| ≤ −R t + 1e−9 (coordinates seen from z0;
    one first-layer and one second-layer coordinate).
    """
    z0 = _check_start(op, z0)
    box = as_box(domain, op.dim)
    if not _inside(box, z0):
        raise DomainError("z0", z0.tolist(), "start point must lie in the domain")
    if cone_R is not None and (op.N != 2 or op.kspec.kappa != 1):
        raise DomainError("cone_R", cone_R, "the cone check is for the operator on R^3 with one drift block")
    if T is not None and T <= 0:
        return ReachSample(endpoints=z0[None].copy(), truncated=0, violations=0,
                           inside_cone=None if cone_R is None else np.array([True]))

    T_max = z0[-1] - box[0][-1]
    m0 = op.kspec.m0

    def run(c: int) -> Tuple[np.ndarray, int]:
        rng = stream(seed, 20, c)
        count = min(chunk, n - c * chunk)
        pts, cut = np.empty((count, op.dim)), 0
        for j in range(count):
            dur = T if T is not None else T_max * rng.uniform(1e-3, 1.0 - 1e-9)
            path = _random_path(rng, m0, dur, pieces, omega_max, kind)
            hit = first_exit(op, z0, path, box)
            if hit is None:
                pts[j] = integrate_curve(op, z0, path)
            else:
                pts[j], cut = hit[1], cut + 1
        return pts, cut

    chunks = range(math.ceil(n / chunk))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    endpoints = np.concatenate([p for p, _ in parts]) if parts else np.empty((0, op.dim))
    truncated = sum(c for _, c in parts)

    violations, inside = 0, None
    if cone_R is not None:
        rel = relative_point(op, z0, endpoints)
        bound = -cone_R * rel[:, -1]
        inside = np.abs(rel[:, 1]) < bound
        violations = int(np.sum(np.abs(rel[:, 1]) > bound + 1e-9))
    logger.info(f"[reach] {len(endpoints)} endpoints, truncated={truncated}, violations={violations}")
    return ReachSample(endpoints=endpoints, truncated=truncated, violations=violations, inside_cone=inside)


# ---------- Steering ----------

def gramian(op: OperatorSpec, s: float) -> np.ndarray:
    """W(s) = ∫_0^s e^{σB} J e^{σBᵀ} dσ, term-wise from e^{σB} = Σ (−1)^i M_i σ^i."""
    k = op.kspec
    M = k.expm_terms
    W = np.zeros((op.N, op.N))
    for i in range(k.kappa + 1):
        for j in range(k.kappa + 1):
            W += (-1.0) ** (i + j) * (M[i] @ k.J @ M[j].T) * s ** (i + j + 1) / (i + j + 1)
    return W


def _defect(op: OperatorSpec, z0: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    s = float(z0[-1] - target[-1])
    if not s > 0:
        raise SteeringError(f"target time {target[-1]} must lie below the start time {z0[-1]}")
    return s, target[:-1] - expm_nilpotent(op.kspec, -s) @ z0[:-1]


def continuous_min_energy(op: OperatorSpec, z0: Any, target: Any) -> Callable[[float], np.ndarray]:
    """ω(σ) = Gᵀ e^{(s−σ)Bᵀ} W(s)⁻¹ d, the L²-minimal control."""
    z0, target = _check_start(op, z0), _check_start(op, target)
    s, d = _defect(op, z0, target)
    try:
        lam = np.linalg.solve(gramian(op, s), d)
    except np.linalg.LinAlgError as e:
        raise SteeringError(f"singular Gramian at s={s}") from e
    m0 = op.kspec.m0
    return lambda sig: (expm_nilpotent(op.kspec, -(s - sig)).T @ lam)[:m0]


def steer_min_energy(
    op: OperatorSpec, z0: Any, target: Any, steps: int = 64, tol: float = 1e-6,
) -> ControlPath:
    """
    Piecewise-constant control of least energy reaching `target` exactly:
    ω_i = Φ_iᵀ W_d⁻¹ d / Δt_i with Φ_i = e^{(s−σ_{i+1})B} P(Δt_i) G and
    W_d = Σ Φ_iΦ_iᵀ/Δt_i.
    """
    z0, target = _check_start(op, z0), _check_start(op, target)
    s, d = _defect(op, z0, target)
    k, m0 = op.kspec, op.kspec.m0
    bp = np.linspace(0.0, s, steps + 1)
    dt = np.diff(bp)
    Phi = np.einsum("nij,njk->nik", expm_nilpotent(k, -(s - bp[1:])), _flow_integral(k, dt)[:, :, :m0])
    Wd = np.einsum("nik,njk->ij", Phi, Phi / dt[:, None, None])
    if np.linalg.cond(Wd) > 1e14:
        raise SteeringError(f"singular Gramian at s={s} (cond {np.linalg.cond(Wd):.3e})")
    lam = np.linalg.solve(Wd, d)
    path = ControlPath(bp, np.einsum("nik,i->nk", Phi, lam) / dt[:, None])
    miss = float(np.max(np.abs(integrate_curve(op, z0, path) - target)))
    if miss > tol * (1.0 + float(np.max(np.abs(target)))):
        raise SteeringError(f"steering misses the target by {miss:.3e}")
    return path


def steer_in_domain(
    op: OperatorSpec,
    z0: Any,
    target: Any,
    domain: Any,
    steps: int = 32,
    levels: Sequence[float] = (0.25, 0.5, 0.75, 0.9, 0.97),
    ramp_fracs: Sequence[float] = (0.02, 0.1, 0.25),
    land_fracs: Sequence[float] = (0.05, 0.1, 0.2, 0.35, 0.5),
) -> ControlPath:
    """
    A control reaching `target` without leaving the open box: the direct
    minimum-energy control when it stays inside, otherwise ramp to a cruise
    level of one first-layer coordinate, cruise with ω = 0, and land by
    minimum-energy steering.
    """
    z0, target = _check_start(op, z0), _check_start(op, target)
    box = as_box(domain, op.dim)
    if not (_inside(box, z0) and _inside(box, target)):
        raise SteeringError("start and target must lie in the domain")
    direct = steer_min_energy(op, z0, target, steps)
    if first_exit(op, z0, direct, box) is None:
        return direct

    s = float(z0[-1] - target[-1])
    m0 = op.kspec.m0
    lo, hi = box
    for level in levels:
        for k in range(m0):
            for sign in (1.0, -1.0):
                room = (hi[k] - z0[k]) if sign > 0 else (z0[k] - lo[k])
                for rf in ramp_fracs:
                    for lf in land_fracs:
                        t1, t3 = rf * s, lf * s
                        t2 = s - t1 - t3
                        if t2 <= 0:
                            continue
                        w = np.zeros(m0)
                        w[k] = sign * level * room / t1
                        head = ControlPath.constant(w, t1).then(ControlPath.idle(m0, t2))
                        if first_exit(op, z0, head, box) is not None:
                            continue
                        mid = integrate_curve(op, z0, head)
                        try:
                            land = steer_min_energy(op, mid, target, steps)
                        except SteeringError:
                            continue
                        path = head.then(land)
                        if first_exit(op, z0, path, box) is None:
                            return path
    raise SteeringError(f"no in-domain control found for target {target.tolist()}")


# ---------- Γ* along curves and the propagation cone ----------

class H4Report(BaseModel):
    s: List[float]
    gamma: List[float]
    ratio: List[float]
    s0: float
    gamma_increasing: bool
    ratio_decay: float
    passed: bool

    def rows(self) -> List[Dict[str, float]]:
        return [{"s": a, "gamma": g, "ratio": q} for a, g, q in zip(self.s, self.gamma, self.ratio)]


def check_H4(op: OperatorSpec, z: Any, r: float, path: ControlPath, s_ladder: Sequence[float]) -> H4Report:
    """
    Γ*(γ(s); z) and (1/s)(∫_0^s|ω|)² along a decreasing ladder. s0 is the
    largest ladder value below which Γ* stays above 1/r. The check passes when
    s0 > 0, Γ* rises strictly over the lower half of the ladder, and the ratio
    falls by at least 100x from the first to the last rung (or vanishes).
    """
    z = _check_start(op, z, path)
    s = np.asarray([float(v) for v in s_ladder])
    if s.size < 2 or np.any(np.diff(s) >= 0) or s[-1] <= 0 or s[0] > path.duration:
        raise DomainError("s_ladder", s.tolist(), f"need a decreasing ladder in (0, {path.duration}]")
    pts = curve_point(op, z, path, s)
    gam = np.asarray(gamma_eval(op, pts, z, grad=False).value, dtype=float)
    ratio = np.array([path.l1_upto(v) ** 2 / v for v in s])

    above = gam * r > 1.0
    s0 = 0.0
    for v, ok in zip(s[::-1], above[::-1]):
        if not ok:
            break
        s0 = float(v)
    tail = gam[len(gam) // 2:]
    increasing = bool(np.all(np.diff(tail) > 0))
    decay = float(ratio[-1] / ratio[0]) if ratio[0] > 0 else 0.0
    passed = s0 > 0 and increasing and decay <= 1e-2
    logger.info(f"[h4] s0={s0:.3g} Γ*↑={increasing} ratio decay={decay:.3e} -> {'pass' if passed else 'FAIL'}")
    return H4Report(
        s=s.tolist(), gamma=gam.tolist(), ratio=ratio.tolist(), s0=s0,
        gamma_increasing=increasing, ratio_decay=decay, passed=passed,
    )


class ConeReport(BaseModel):
    R: float
    n: int
    seed: int
    violations: int
    max_ratio: float
    cells_in_cone: int
    cells_hit: int
    coverage: float


def _cell_points(lo: np.ndarray, hi: np.ndarray) -> List[np.ndarray]:
    """Cell center, then the cell point nearest the cone axis at the latest-reachable time."""
    center = 0.5 * (lo + hi)
    inset = 0.01 * (hi - lo)
    easy = np.clip(np.zeros_like(lo), lo + inset, hi - inset)
    easy[-1] = lo[-1] + inset[-1]
    return [center, easy]


def cone_experiment(
    op: OperatorSpec,
    R: float = 1.0,
    n: int = 10_000,
    seed: int = 0,
    cells: int = 10,
    shrink: float = 0.9,
    steer: bool = True,
    workers: int = 1,
) -> Tuple[ConeReport, ReachSample]:
    """
    Propagation cone from the origin in Ω = (−R, R)² × (−1, 1): random curves
    never leave {|y| ≤ −Rt}, and steering hits the grid cells whose centers
    lie in {|y| < shrink·(−Rt)}.
    """
    if op.N != 2 or op.kspec.kappa != 1:
        raise DomainError("operator", op.kspec.m_dims, "the cone experiment runs on R^3 with one drift block")
    z0 = np.zeros(3)
    box = (np.array([-R, -R, -1.0]), np.array([R, R, 1.0]))
    sample = sample_attainable(op, z0, box, n, seed, omega_max=R / 2.0, cone_R=R, workers=workers)
    s_end = -sample.endpoints[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(s_end > 0, np.abs(sample.endpoints[:, 1]) / (R * s_end), 0.0)

    in_cone, hit = 0, 0
    if steer:
        edges = [np.linspace(-R, R, cells + 1), np.linspace(-R, R, cells + 1), np.linspace(-1.0, 0.0, cells + 1)]
        for i in range(cells):
            for j in range(cells):
                for k in range(cells):
                    lo = np.array([edges[0][i], edges[1][j], edges[2][k]])
                    hi = np.array([edges[0][i + 1], edges[1][j + 1], edges[2][k + 1]])
                    c = 0.5 * (lo + hi)
                    if not abs(c[1]) < shrink * (-R * c[2]):
                        continue
                    in_cone += 1
                    for p in _cell_points(lo, hi):
                        try:
                            steer_in_domain(op, z0, p, box)
                        except SteeringError:
                            continue
                        hit += 1
                        break
    coverage = hit / in_cone if in_cone else 1.0
    report = ConeReport(
        R=R, n=n, seed=seed, violations=sample.violations,
        max_ratio=float(ratios.max()) if ratios.size else 0.0,
        cells_in_cone=in_cone, cells_hit=hit, coverage=coverage,
    )
    logger.info(f"[cone] R={R} violations={report.violations} coverage={coverage:.3f} ({hit}/{in_cone})")
    return report, sample
