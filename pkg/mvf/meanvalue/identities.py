# mvf/meanvalue/identities.py
"""
Symbolic operator application, the divergence identity behind the mean
value formulas, and the reproduction limit of Γ*.

Public API:
    operator_frame, apply_operator, divergence_identity_residual,
    random_polynomial, reproduction_limit, LimitReport
"""

from __future__ import annotations
import itertools
import math
from typing import Any, Callable, Dict, List, Sequence

import numpy as np
import sympy as sp
from pydantic import BaseModel

from mvf.errors import DimensionError, DomainError
from mvf.groups.catalog import kolmogorov
from mvf.groups.core import coordinate_symbols
from mvf.groups.fields import Frame, group_frame
from mvf.kernels.kolmo import OperatorSpec, expm_nilpotent, hermite_grid
from mvf.utils.logger import logger
from mvf.utils.rng import stream


def _exact(x: float) -> sp.Rational:
    return sp.nsimplify(float(x), rational=True)


def operator_frame(op: OperatorSpec) -> Frame:
    """∂_{x_1..x_m0} and X_{m+1} = ⟨Bx, ∇⟩ − ∂_t, from the group law."""
    return group_frame(kolmogorov(op.kspec))


def _coeff_data(op: OperatorSpec):
    m0 = op.kspec.m0
    A = sp.Matrix(m0, m0, lambda i, j: _exact(op.A[i, j]))
    b = [_exact(v) for v in op.b]
    return A, b, _exact(op.c)


def apply_operator(op: OperatorSpec, u: sp.Expr, adjoint: bool = False) -> sp.Expr:
    """
    ℒu  = Σ a_ij ∂_i∂_j u + ⟨Bx + b, ∇_x u⟩ + c u − ∂_t u
    ℒ*v = Σ a_ij ∂_i∂_j v − ⟨Bx + b, ∇_x v⟩ + c v + ∂_t v
    (tr B = 0 and b is constant, so no divergence terms appear).
    """
    z = coordinate_symbols(op.dim, "z")
    N, m0 = op.N, op.kspec.m0
    A, b, c = _coeff_data(op)
    Bx = op.kspec.B_exact * sp.Matrix(z[:N])
    drift = sum((Bx[k] + (b[k] if k < m0 else 0)) * sp.diff(u, z[k]) for k in range(N))
    diff2 = sum(A[i, j] * sp.diff(u, z[i], z[j]) for i in range(m0) for j in range(m0))
    dt = sp.diff(u, z[N])
    if adjoint:
        return sp.expand(diff2 - drift + c * u + dt)
    return sp.expand(diff2 + drift + c * u - dt)


def _divergence_form(op: OperatorSpec, u: sp.Expr, v: sp.Expr) -> sp.Expr:
    """Σ X_i(u a_ij X_j v − v a_ij X_j u − u v b_i) − X_{m+1}(u v)."""
    fr = operator_frame(op)
    A, b, _ = _coeff_data(op)
    X = fr.horizontal
    total = sp.Integer(0)
    for i in range(fr.m):
        flux = sum(A[i, j] * (u * X[j].apply(v) - v * X[j].apply(u)) for j in range(fr.m))
        flux -= u * v * b[i]
        total += X[i].apply(sp.expand(flux))
    total -= fr.drift.apply(sp.expand(u * v))
    return sp.expand(total)


def divergence_identity_residual(
    op: OperatorSpec, u: sp.Expr, v: sp.Expr, samples: int = 32, seed: int = 0,
) -> float:
    """
    max |uℒ*v − vℒu − div Φ| / (1 + max |uℒ*v − vℒu|) over seeded points;
    zero for exact-rational inputs since both sides are expanded polynomials.
    """
    z = coordinate_symbols(op.dim, "z")
    lhs = sp.expand(u * apply_operator(op, v, adjoint=True) - v * apply_operator(op, u))
    rhs = _divergence_form(op, u, v)
    diff = sp.expand(lhs - rhs)
    if diff == 0:
        return 0.0
    pts = stream(seed, 3).standard_normal((samples, op.dim))
    f_diff = sp.lambdify(z, diff, modules="numpy")
    f_lhs = sp.lambdify(z, lhs, modules="numpy")
    d = np.abs(np.broadcast_to(f_diff(*pts.T), (samples,)))
    scale = 1.0 + float(np.max(np.abs(np.broadcast_to(f_lhs(*pts.T), (samples,)))))
    res = float(np.max(d)) / scale
    logger.debug(f"[divergence] residual {res:.3e}")
    return res


def random_polynomial(dim: int, degree: int, seed: int, key: int = 0) -> sp.Expr:
    """Seeded polynomial in z0.. with integer coefficients in [−3, 3]."""
    z = coordinate_symbols(dim, "z")
    rng = stream(seed, 4, key)
    expr = sp.Integer(0)
    for exps in itertools.product(range(degree + 1), repeat=dim):
        if sum(exps) <= degree and rng.random() < 0.5:
            expr += int(rng.integers(-3, 4)) * sp.Mul(*[s ** e for s, e in zip(z, exps)])
    return sp.expand(expr)


# ---------- Reproduction limit ----------

class LimitReport(BaseModel):
    eps: List[float]
    error: List[float]
    monotone: bool
    final: float

    def rows(self) -> List[Dict[str, float]]:
        return [{"eps": e, "error": v} for e, v in zip(self.eps, self.error)]


def reproduction_limit(
    op: OperatorSpec,
    phi: Callable[[np.ndarray], np.ndarray],
    xi: Any,
    eps_ladder: Sequence[float],
    order: int = 24,
) -> LimitReport:
    """
    |∫ Γ*(ξ, t₀−ε; x, t₀) φ(x) dx − φ(ξ)| along the ladder. In x the kernel
    is e^{cε} times the Gaussian with mean E(ε)ξ − εb and covariance 2K(ε),
    integrated by Gauss–Hermite quadrature.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (op.N,):
        raise DimensionError("xi", op.N, xi.size)
    eps = [float(e) for e in eps_ladder]
    if any(e <= 0 for e in eps):
        raise DomainError("eps_ladder", eps, "entries must be positive")
    nodes, weights = hermite_grid(op.N, order)
    weights = weights / (2.0 * math.pi) ** (op.N / 2.0)
    target = float(np.asarray(phi(xi[None]), dtype=float).reshape(-1)[0])
    errors = []
    for e in eps:
        mean = expm_nilpotent(op.kspec, e) @ xi - e * op.b_ext
        L = np.linalg.cholesky(2.0 * op.kernel_cov(e))
        vals = np.asarray(phi(mean + nodes @ L.T), dtype=float)
        approx = math.exp(op.c * e) * float(np.sum(weights * vals))
        errors.append(abs(approx - target))
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    return LimitReport(eps=eps, error=errors, monotone=monotone, final=errors[-1])
