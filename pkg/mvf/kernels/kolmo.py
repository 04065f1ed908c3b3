# mvf/kernels/kolmo.py
"""
Constant-coefficient Kolmogorov operators and their Gaussian fundamental
solutions.

    ℒu = Σ a_ij ∂_i∂_j u + ⟨Bx, ∇u⟩ + ⟨b, ∇u⟩ + c u − ∂_t u

on R^{N+1}, x split into blocks of sizes m_0 ≥ m_1 ≥ ... ≥ m_κ and B block
subdiagonal. B = 0 (κ = 0) is the heat operator.

Conventions:
    E(t) = exp(−tB) = Σ_i (−tB)^i / i!   (finite: B^{κ+1} = 0)
    C(t) = ∫_0^t E(s) J Eᵀ(s) ds         (J = diag(I_{m0}, 0))
    K(s) = Λ·C(s), or C_A(s) with J replaced by diag(A, 0)
    Γ*(ξ,τ; x,t) = Γ(x,t; ξ,τ)
        = e^{cs} (4π)^{-N/2} det K(s)^{-1/2} exp(-¼⟨K(s)⁻¹w, w⟩),
      s = t − τ > 0, w = x − E(s)ξ + s·b, and 0 for s ≤ 0.

Every evaluation goes through the unit-time factor K(s) = D_s K(1) D_s,
D_s = diag(s^{(2j+1)/2} on block j), exact because D_λ B D_λ⁻¹ = λ²B.

Public API:
    KolmogorovSpec, OperatorSpec, GammaEval, expm_nilpotent, covariance,
    covariance_symbolic, gamma_eval, forward_gamma, pde_residual,
    below_pole, parabolic_dilate, homogeneity_residual,
    normalization_error, chapman_kolmogorov
"""

from __future__ import annotations
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, List, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy import linalg

from mvf.config.settings import RESCALE_BELOW
from mvf.errors import DimensionError, DomainError, NonFiniteError, StencilDomainError
from mvf.integrate.estimate import Estimate
from mvf.utils.rng import stream

_LOG_TINY_DET = math.log(1e-300)


def _rational(x: Any) -> sp.Rational:
    if isinstance(x, str):
        return sp.Rational(x)
    if isinstance(x, (int, np.integer)):
        return sp.Integer(int(x))
    return sp.nsimplify(float(x), rational=True)


# ---------- Specs ----------

@dataclass(frozen=True, eq=False)
class KolmogorovSpec:
    m_dims: Tuple[int, ...]
    blocks: Tuple[sp.ImmutableMatrix, ...] = ()

    def __post_init__(self) -> None:
        m = tuple(int(v) for v in self.m_dims)
        if not m or min(m) < 1 or any(a < b for a, b in zip(m, m[1:])):
            raise DomainError("m_dims", self.m_dims, "need m_0 ≥ m_1 ≥ … ≥ m_κ ≥ 1")
        blocks = tuple(sp.ImmutableMatrix(b) if not isinstance(b, sp.MatrixBase)
                       else sp.ImmutableMatrix(b) for b in self.blocks)
        if len(blocks) != len(m) - 1:
            raise DimensionError("B blocks", len(m) - 1, len(blocks))
        for j, blk in enumerate(blocks, start=1):
            if blk.shape != (m[j], m[j - 1]):
                raise DomainError(f"B_{j}", blk.shape, f"block must be {m[j]}x{m[j - 1]}")
            if blk.rank() != m[j]:
                raise DomainError(f"B_{j}", blk.tolist(), f"block must have rank {m[j]}")
        object.__setattr__(self, "m_dims", m)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, m_dims: Sequence[int], blocks: Sequence[Sequence[Sequence[Any]]]) -> "KolmogorovSpec":
        mats = tuple(sp.ImmutableMatrix([[_rational(v) for v in row] for row in blk]) for blk in blocks)
        return cls(tuple(m_dims), mats)

    @classmethod
    def canonical(cls, m_dims: Sequence[int]) -> "KolmogorovSpec":
        """B_j = [I_{m_j} 0], the chain used by the bundled examples."""
        m = tuple(int(v) for v in m_dims)
        blocks = tuple(sp.ImmutableMatrix(sp.eye(m[j], m[j - 1])) for j in range(1, len(m)))
        return cls(m, blocks)

    @classmethod
    def heat(cls, N: int) -> "KolmogorovSpec":
        return cls((int(N),), ())

    # ---------- shape ----------

    @property
    def N(self) -> int:
        return sum(self.m_dims)

    @property
    def kappa(self) -> int:
        return len(self.m_dims) - 1

    @property
    def m0(self) -> int:
        return self.m_dims[0]

    @property
    def offsets(self) -> Tuple[int, ...]:
        out, acc = [], 0
        for mj in self.m_dims:
            out.append(acc)
            acc += mj
        return tuple(out)

    @property
    def block_of(self) -> Tuple[int, ...]:
        return tuple(j for j, mj in enumerate(self.m_dims) for _ in range(mj))

    @property
    def Q(self) -> int:
        return 1 + sum((j + 1) * mj for j, mj in enumerate(self.m_dims))

    @property
    def Q_P(self) -> int:
        return 2 + sum((2 * j + 1) * mj for j, mj in enumerate(self.m_dims))

    @cached_property
    def B_exact(self) -> sp.ImmutableMatrix:
        B = sp.zeros(self.N, self.N)
        off = self.offsets
        for j, blk in enumerate(self.blocks, start=1):
            B[off[j]:off[j] + self.m_dims[j], off[j - 1]:off[j - 1] + self.m_dims[j - 1]] = blk
        return sp.ImmutableMatrix(B)

    @cached_property
    def B(self) -> np.ndarray:
        return np.array(self.B_exact.tolist(), dtype=float)

    @cached_property
    def J(self) -> np.ndarray:
        J = np.zeros((self.N, self.N))
        J[: self.m0, : self.m0] = np.eye(self.m0)
        return J

    @cached_property
    def expm_terms_exact(self) -> Tuple[sp.ImmutableMatrix, ...]:
        """M_i = (−B)^i / i!, so that E(t) = Σ M_i t^i."""
        terms, P = [], sp.eye(self.N)
        for i in range(self.kappa + 1):
            terms.append(sp.ImmutableMatrix(P / sp.factorial(i)))
            P = P * (-self.B_exact)
        return tuple(terms)

    @cached_property
    def expm_terms(self) -> np.ndarray:
        return np.array([np.array(M.tolist(), dtype=float) for M in self.expm_terms_exact])

    @cached_property
    def parabolic_exps(self) -> np.ndarray:
        """Exponent 2j+1 of λ for each x coordinate in block j."""
        return np.array([2 * j + 1 for j in self.block_of], dtype=float)

    def expm_symbolic(self, t: sp.Symbol) -> sp.Matrix:
        return sum((M * t ** i for i, M in enumerate(self.expm_terms_exact)), sp.zeros(self.N, self.N))

    def nilpotency_holds(self) -> bool:
        return (self.B_exact ** (self.kappa + 1)).is_zero_matrix


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    kspec: KolmogorovSpec
    diffusion: Any = 1.0
    b: Tuple[float, ...] | None = None
    c: float = 0.0

    def __post_init__(self) -> None:
        m0 = self.kspec.m0
        if np.ndim(self.diffusion) == 0:
            lam = float(self.diffusion)
            if not np.isfinite(lam) or lam <= 0:
                raise DomainError("diffusion", self.diffusion, "Λ must be positive")
            A = lam * np.eye(m0)
        else:
            A = np.asarray(self.diffusion, dtype=float)
            if A.shape != (m0, m0):
                raise DomainError("diffusion", A.shape, f"A must be {m0}x{m0}")
            if not np.allclose(A, A.T, rtol=0, atol=1e-14):
                raise DomainError("diffusion", A.tolist(), "A must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise DomainError("diffusion", A.tolist(), "A must be positive definite")
        b = np.zeros(m0) if self.b is None else np.asarray(self.b, dtype=float)
        if b.shape != (m0,):
            raise DimensionError("drift b", m0, b.size)
        if np.any(b != 0) and self.kspec.kappa > 0:
            raise DomainError("b", b.tolist(), "constant first-layer drift is supported only when B = 0")
        c = float(self.c)
        if not np.isfinite(c) or c > 0:
            raise DomainError("c", self.c, "need a finite c ≤ 0")
        object.__setattr__(self, "b", tuple(float(v) for v in b))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "_A", A)

    # ---------- diffusion ----------

    @property
    def N(self) -> int:
        return self.kspec.N

    @property
    def dim(self) -> int:
        return self.kspec.N + 1

    @property
    def A(self) -> np.ndarray:
        return self._A  # type: ignore[attr-defined]

    @property
    def scalar_diffusion(self) -> float | None:
        return None if np.ndim(self.diffusion) else float(self.diffusion)

    @cached_property
    def ellipticity(self) -> float:
        """Smallest Λ with Λ⁻¹|ξ|² ≤ ⟨Aξ,ξ⟩ ≤ Λ|ξ|²."""
        ev = np.linalg.eigvalsh(self.A)
        return float(max(ev.max(), 1.0 / ev.min()))

    @cached_property
    def J_A(self) -> np.ndarray:
        m0 = self.kspec.m0
        out = np.zeros((self.N, self.N))
        out[:m0, :m0] = self.A
        return out

    @cached_property
    def b_ext(self) -> np.ndarray:
        out = np.zeros(self.N)
        out[: self.kspec.m0] = self.b
        return out

    @property
    def has_drift(self) -> bool:
        return any(v != 0 for v in self.b)

    # ---------- covariance ----------

    def _cov_terms(self, J: np.ndarray) -> np.ndarray:
        """coef[k] with C(t) = Σ_k coef[k] t^{k+1}, from Σ M_i J M_jᵀ t^{i+j}."""
        M = self.kspec.expm_terms
        kap = self.kspec.kappa
        out = np.zeros((2 * kap + 1, self.N, self.N))
        for i in range(kap + 1):
            for j in range(kap + 1):
                out[i + j] += M[i] @ J @ M[j].T / (i + j + 1)
        return out

    @cached_property
    def kernel_cov_terms(self) -> np.ndarray:
        return self._cov_terms(self.J_A)

    @cached_property
    def K1(self) -> np.ndarray:
        return self.kernel_cov_terms.sum(axis=0)

    @cached_property
    def K1_chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.K1)

    @cached_property
    def logdet_K1(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.K1_chol))))

    @cached_property
    def psum(self) -> float:
        """Σ (2j+1) m_j = Q_P − 2, the exponent of s in det K(s)."""
        return float(self.kspec.parabolic_exps.sum())

    def scale_vector(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.power(s[..., None], 0.5 * self.kspec.parabolic_exps)

    def kernel_cov(self, s: float) -> np.ndarray:
        """K(s) = D_s K(1) D_s."""
        d = self.scale_vector(s)
        return d[:, None] * self.K1 * d[None, :]

    def logdet_kernel_cov(self, s: Any) -> np.ndarray:
        return self.logdet_K1 + self.psum * np.log(np.asarray(s, dtype=float))

    def log_peak(self, s: Any) -> np.ndarray:
        """log sup_ξ Γ*(ξ, t₀−s; z₀) = cs − (N/2)log 4π − ½ log det K(s)."""
        s = np.asarray(s, dtype=float)
        return self.c * s - 0.5 * self.N * math.log(4.0 * math.pi) - 0.5 * self.logdet_kernel_cov(s)

    def E(self, t: Any) -> np.ndarray:
        return expm_nilpotent(self.kspec, t)


# ---------- Exponential and covariance ----------

def expm_nilpotent(k: KolmogorovSpec, t: Any) -> np.ndarray:
    """E(t) = exp(−tB) as the terminating series; t may be an array."""
    t = np.asarray(t, dtype=float)
    powers = np.power(t[..., None], np.arange(k.kappa + 1, dtype=float))
    return np.tensordot(powers, k.expm_terms, axes=([-1], [0]))


def covariance(op: OperatorSpec, t: float) -> np.ndarray:
    """
    C(t) = ∫_0^t E(s) J Eᵀ(s) ds with J = diag(I, 0) for scalar diffusion and
    diag(A, 0) for a matrix A, by term-wise integration of the polynomial
    integrand. Small t goes through the parabolic rescaling.
    """
    t = float(t)
    if not np.isfinite(t) or t <= 0:
        raise DomainError("t", t, "covariance needs t > 0")
    J = op.kspec.J if op.scalar_diffusion is not None else op.J_A
    terms = op._cov_terms(J)
    if t < RESCALE_BELOW:
        C1 = terms.sum(axis=0)
        d = op.scale_vector(t)
        return d[:, None] * C1 * d[None, :]
    powers = t ** np.arange(1, terms.shape[0] + 1, dtype=float)
    return np.tensordot(powers, terms, axes=([0], [0]))


def covariance_symbolic(k: KolmogorovSpec, t: sp.Symbol | None = None) -> sp.Matrix:
    t = t if t is not None else sp.Symbol("t", positive=True)
    s = sp.Symbol("s", positive=True)
    E = k.expm_symbolic(s)
    J = sp.zeros(k.N, k.N)
    J[: k.m0, : k.m0] = sp.eye(k.m0)
    integrand = (E * J * E.T).applyfunc(sp.expand)
    return integrand.applyfunc(lambda e: sp.integrate(e, (s, 0, t)))


# ---------- Γ evaluation ----------

@dataclass(frozen=True)
class GammaEval:
    value: np.ndarray
    hgrad: np.ndarray
    grad_x: np.ndarray
    underflow: np.ndarray

    def __iter__(self):
        yield self.value
        yield self.hgrad


def _split(op: OperatorSpec, z: Any, what: str) -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != op.dim:
        raise DimensionError(what, op.dim, 0 if arr.ndim == 0 else arr.shape[-1])
    if not np.all(np.isfinite(arr)):
        bad = arr.reshape(-1, op.dim)[~np.all(np.isfinite(arr.reshape(-1, op.dim)), axis=1)][0]
        raise NonFiniteError(what, bad)
    return arr


def gamma_eval(op: OperatorSpec, z: Any, pole: Any, grad: bool = True) -> GammaEval:
    """
    Γ*(z; pole) with its horizontal gradient at z = (ξ, τ).

    hgrad[..., :m0] are ∂_{ξ_i}Γ* for the first block, hgrad[..., m0] is
    X_{m+1}Γ* = ⟨Bξ, ∇_ξΓ*⟩ − ∂_τΓ*. Inputs broadcast over leading axes.
    """
    z = _split(op, z, "point")
    pole = _split(op, pole, "pole")
    shape = np.broadcast_shapes(z.shape[:-1], pole.shape[:-1])
    z = np.broadcast_to(z, shape + (op.dim,)).reshape(-1, op.dim)
    pole = np.broadcast_to(pole, shape + (op.dim,)).reshape(-1, op.dim)
    k = op.kspec
    N, m0 = k.N, k.m0

    xi, tau = z[:, :N], z[:, N]
    x, t = pole[:, :N], pole[:, N]
    s = t - tau
    pos = s > 0
    s_ = np.where(pos, s, 1.0)

    E = expm_nilpotent(k, s_)
    Exi = np.einsum("nij,nj->ni", E, xi)
    w = x - Exi + s_[:, None] * op.b_ext
    d = op.scale_vector(s_)
    u = linalg.cho_solve((op.K1_chol, True), (w / d).T).T
    v = u / d  # K(s)⁻¹ w
    q = np.sum(w * v, axis=1)
    logdet = op.logdet_kernel_cov(s_)
    logval = op.c * s_ - 0.5 * N * math.log(4.0 * math.pi) - 0.5 * logdet - 0.25 * q
    underflow = pos & (logdet < _LOG_TINY_DET)
    live = pos & ~underflow
    value = np.where(live, np.exp(np.where(live, logval, 0.0)), 0.0)

    if grad:
        p = np.einsum("nji,nj->ni", E, v)  # E(s)ᵀ K⁻¹ w
        grad_x = 0.5 * value[:, None] * p
        w_s = Exi @ k.B.T + op.b_ext
        p0 = p[:, :m0]
        dq = 2.0 * np.sum(v * w_s, axis=1) - np.einsum("ni,ij,nj->n", p0, op.A, p0)
        dlog = op.c - 0.5 * op.psum / s_ - 0.25 * dq
        drift = 0.5 * np.sum((xi @ k.B.T) * p, axis=1) + dlog
        hgrad = np.concatenate([grad_x[:, :m0], (value * drift)[:, None]], axis=1)
        hgrad = np.where(live[:, None], hgrad, 0.0)
        grad_x = np.where(live[:, None], grad_x, 0.0)
    else:
        hgrad = np.zeros((z.shape[0], m0 + 1))
        grad_x = np.zeros((z.shape[0], N))

    return GammaEval(
        value=value.reshape(shape),
        hgrad=hgrad.reshape(shape + (m0 + 1,)),
        grad_x=grad_x.reshape(shape + (N,)),
        underflow=underflow.reshape(shape),
    )


def forward_gamma(op: OperatorSpec, zeta: Any) -> Callable[[np.ndarray], np.ndarray]:
    """u(z) = Γ(z; ζ), a solution of ℒu = 0 for t > t_ζ."""
    zeta = _split(op, zeta, "pole")

    def u(points: np.ndarray) -> np.ndarray:
        return gamma_eval(op, zeta, points, grad=False).value

    return u


# ---------- Residual oracle ----------

def below_pole(pole: Any, margin: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    t0 = float(np.asarray(pole, dtype=float)[-1])

    def inside(points: np.ndarray) -> np.ndarray:
        return points[..., -1] < t0 - margin

    return inside


def _stencil_points(z: np.ndarray, dirs: np.ndarray, h: float) -> np.ndarray:
    """z + k·h·d for k in (−2,−1,1,2); dirs (n, D) or (D,). Returns (4, n, D)."""
    ks = np.array([-2.0, -1.0, 1.0, 2.0])[:, None, None]
    return z[None] + ks * h * np.broadcast_to(dirs, z.shape)[None]


def pde_residual(
    op: OperatorSpec,
    u: Callable[[np.ndarray], np.ndarray],
    z: Any,
    h: float = 1e-3,
    adjoint: bool = True,
    domain: Callable[[np.ndarray], np.ndarray] | None = None,
    relative: bool = False,
) -> np.ndarray | float:
    """
    |ℒ*u(z)| (adjoint=True) or |ℒu(z)| with fourth-order central differences
    on the coordinate form of the operator. With relative=True the residual
    is divided by the sum of magnitudes of its terms.
    """
    z = _split(op, z, "point")
    single = z.ndim == 1
    z = np.atleast_2d(z)
    n, D = z.shape
    N, m0 = op.N, op.kspec.m0
    A = op.A

    # drift direction: ±(Bx + b) in x, ∓1 in t
    V = np.zeros_like(z)
    V[:, :N] = z[:, :N] @ op.kspec.B.T + op.b_ext
    V[:, N] = -1.0
    if adjoint:
        V = -V

    dirs: List[Tuple[float, np.ndarray]] = []
    for i in range(m0):
        e = np.zeros(D)
        e[i] = 1.0
        dirs.append((A[i, i], e))
        for j in range(i + 1, m0):
            if A[i, j] != 0.0:
                f = np.zeros(D)
                f[j] = 1.0
                dirs.append((0.5 * A[i, j], e + f))
                dirs.append((-0.5 * A[i, j], e - f))

    clouds = [_stencil_points(z, d, h) for _, d in dirs] + [_stencil_points(z, V, h)]
    pts = np.concatenate([z[None]] + clouds, axis=0).reshape(-1, D)
    if domain is not None:
        ok = np.asarray(domain(pts), dtype=bool)
        if not np.all(ok):
            raise StencilDomainError(pts[~ok][0])
    vals = np.asarray(u(pts), dtype=float).reshape(1 + 4 * len(clouds), n)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("function value in stencil")
    f0 = vals[0]

    terms = []
    for idx, (coef, _) in enumerate(dirs):
        fm2, fm1, fp1, fp2 = vals[1 + 4 * idx: 5 + 4 * idx]
        d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
        terms.append(coef * d2)
    fm2, fm1, fp1, fp2 = vals[-4:]
    terms.append((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
    terms.append(op.c * f0)

    stack = np.stack(terms)
    res = np.abs(stack.sum(axis=0))
    if relative:
        res = res / (np.abs(stack).sum(axis=0) + 1e-300)
    return float(res[0]) if single else res


# ---------- Homogeneity, normalization, semigroup ----------

def parabolic_dilate(k: KolmogorovSpec, lam: float, z: Any) -> np.ndarray:
    """δ̃_λ: block j scaled by λ^{2j+1}, t by λ²."""
    if lam <= 0:
        raise DomainError("lambda", lam, "dilations need lambda > 0")
    z = np.asarray(z, dtype=float)
    exps = np.append(k.parabolic_exps, 2.0)
    return z * np.power(float(lam), exps)


def homogeneity_residual(op: OperatorSpec, z: Any, lam: float) -> np.ndarray | float:
    """|Γ(δ̃_λ z; 0)·λ^{Q_P−2} − Γ(z; 0)| / Γ(z; 0) for the model operator."""
    if op.has_drift or op.c != 0.0:
        raise DomainError("operator", "b, c", "homogeneity holds for the model operator (b = 0, c = 0)")
    origin = np.zeros(op.dim)
    base = gamma_eval(op, origin, z, grad=False).value
    scaled = gamma_eval(op, origin, parabolic_dilate(op.kspec, lam, z), grad=False).value
    out = np.abs(scaled * lam ** (op.kspec.Q_P - 2) - base) / base
    return float(out) if np.ndim(out) == 0 else out


def _gaussian_in_xi(op: OperatorSpec, x: np.ndarray, s: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of ξ ↦ Γ(x, t; ξ, t−s)/e^{cs}."""
    Einv = expm_nilpotent(op.kspec, -s)
    mean = Einv @ (x + s * op.b_ext)
    cov = Einv @ (2.0 * op.kernel_cov(s)) @ Einv.T
    return mean, cov


def hermite_grid(dim: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss–Hermite rule for the weight e^{−|y|²/2} on R^dim."""
    y, wts = np.polynomial.hermite_e.hermegauss(order)
    grids = np.meshgrid(*([y] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*([wts] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=1)
    return nodes, weights


def normalization_error(op: OperatorSpec, pole: Any, s: float, order: int = 8) -> float:
    """|e^{−cs}∫Γ(x,t;ξ,t−s) dξ − 1| by Gauss–Hermite quadrature in whitened ξ."""
    if s <= 0:
        raise DomainError("s", s, "need t > τ")
    pole = _split(op, pole, "pole")
    x, t = pole[: op.N], pole[op.N]
    mean, cov = _gaussian_in_xi(op, x, s)
    L = np.linalg.cholesky(cov)
    y, wts = hermite_grid(op.N, order)
    xi = mean + y @ L.T
    pts = np.column_stack([xi, np.full(len(xi), t - s)])
    vals = gamma_eval(op, pts, pole, grad=False).value
    jac = abs(np.linalg.det(L))
    mass = jac * np.sum(wts * np.exp(0.5 * np.sum(y * y, axis=1)) * vals)
    return abs(mass * math.exp(-op.c * s) - 1.0)


def chapman_kolmogorov(
    op: OperatorSpec, pole: Any, z: Any, sigma: float, samples: int, seed: int, batches: int = 16,
) -> Tuple[Estimate, float]:
    """
    Monte-Carlo estimate of ∫Γ(x,t; y,σ) Γ(y,σ; ξ,τ) dy against the exact
    Γ(x,t; ξ,τ). pole = (x,t), z = (ξ,τ) with τ < σ < t.
    """
    pole = _split(op, pole, "pole")
    z = _split(op, z, "point")
    x, t = pole[: op.N], pole[op.N]
    tau = z[op.N]
    if not (tau < sigma < t):
        raise DomainError("sigma", sigma, "need τ < σ < t")
    s1 = t - sigma
    mean, cov = _gaussian_in_xi(op, x, s1)
    L = np.linalg.cholesky(cov)
    per = max(1, samples // batches)
    means = []
    for bidx in range(batches):
        rng = stream(seed, bidx)
        y = mean + rng.standard_normal((per, op.N)) @ L.T
        mid = np.column_stack([y, np.full(per, sigma)])
        inner = gamma_eval(op, z, mid, grad=False).value
        means.append(math.exp(op.c * s1) * float(np.mean(inner)))
    arr = np.asarray(means)
    est = Estimate(
        value=float(arr.mean()),
        std_error=float(arr.std(ddof=1) / math.sqrt(batches)),
        n_effective=per * batches,
        seed=seed,
    )
    truth = float(gamma_eval(op, z, pole, grad=False).value)
    return est, truth


# ---------- Mean-value kernels ----------

def mv_kernels(op: OperatorSpec, pole: Any, z: Any, alpha: float = 2.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    K = ⟨A∇_hΓ*, ∇_hΓ*⟩ / |∇_GΓ*| and M_α = ⟨A∇_hΓ*, ∇_hΓ*⟩ / Γ*^α at z,
    ∇_h the first m₀ frame derivatives and |∇_GΓ*| the norm of all m₀+1.
    Both are 0 where Γ* or its frame gradient vanishes.
    """
    if alpha <= 1.0:
        raise DomainError("alpha", alpha, "need alpha > 1")
    ev = gamma_eval(op, z, pole)
    m0 = op.kspec.m0
    gh = ev.hgrad[..., :m0]
    quad = np.einsum("...i,ij,...j->...", gh, op.A, gh)
    norm = np.linalg.norm(ev.hgrad, axis=-1)
    K = np.divide(quad, norm, out=np.zeros_like(quad), where=norm > 0)
    live = ev.value > 0
    safe = np.where(live, ev.value, 1.0)
    # ⟨A∇Γ,∇Γ⟩/Γ^α = ¼ Γ^{2−α} ⟨A p₀, p₀⟩, taken in that form to avoid Γ² underflow
    p0 = np.where(live[..., None], 2.0 * ev.grad_x[..., :m0] / safe[..., None], 0.0)
    M = 0.25 * np.power(safe, 2.0 - alpha) * np.einsum("...i,ij,...j->...", p0, op.A, p0)
    M = np.where(live, M, 0.0)
    return K, M
