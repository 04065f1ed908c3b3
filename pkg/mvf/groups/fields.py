# mvf/groups/fields.py
"""
Polynomial vector fields X = Σ φ_k ∂_k on R^{N+1} with exact rational
coefficients: Lie brackets, Hörmander rank, invariance/homogeneity checks
against a GroupSpec, and left-invariant frames generated from a group law.

Public API:
    PolyVectorField, Frame, FieldReport, lie_bracket, group_frame,
    bracket_levels, bracket_table, hormander_rank, stratification_depth,
    check_invariance_homogeneity, jacobi_residual, is_pyramid,
    coordinate_divergence, flow_derivative, field_to_sparse,
    field_from_sparse
"""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import sympy as sp
from pydantic import BaseModel

from mvf.config.settings import AXIOM_TOL, RANK_REL_TOL
from mvf.errors import DimensionError, DomainError
from mvf.groups.core import GroupSpec, _eval_vector, _lambdify_vector, as_points, compose, coordinate_symbols
from mvf.utils.logger import logger
from mvf.utils.rng import stream


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    coeffs: Tuple[sp.Expr, ...]
    name: str = ""

    def __post_init__(self) -> None:
        coeffs = tuple(sp.expand(sp.sympify(c)) for c in self.coeffs)
        allowed = set(coordinate_symbols(len(coeffs), "z"))
        for c in coeffs:
            if not c.free_symbols <= allowed:
                raise DomainError("field coefficient", str(c), f"only z0..z{len(coeffs) - 1} may appear")
            if not c.is_polynomial(*allowed):
                raise DomainError("field coefficient", str(c), "coefficients must be polynomials")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @cached_property
    def syms(self) -> Tuple[sp.Symbol, ...]:
        return coordinate_symbols(self.dim, "z")

    @cached_property
    def _fn(self) -> Callable[..., Any]:
        return _lambdify_vector(self.syms, self.coeffs)

    def __call__(self, z: Any) -> np.ndarray:
        """Coefficient vector at z (stacks allowed)."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise DimensionError(f"field {self.name or '?'}", self.dim, z.shape[-1])
        return _eval_vector(self._fn, z.shape[:-1], *np.moveaxis(z, -1, 0))

    def apply(self, u: sp.Expr) -> sp.Expr:
        """X u for a symbolic function u of z0.."""
        return sp.expand(sum(c * sp.diff(u, s) for c, s in zip(self.coeffs, self.syms)))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "PolyVectorField":
        return PolyVectorField(tuple(-c for c in self.coeffs), f"-{self.name}" if self.name else "")

    def scaled(self, k: Any) -> "PolyVectorField":
        return PolyVectorField(tuple(sp.sympify(k) * c for c in self.coeffs), self.name)

    def __repr__(self) -> str:
        terms = [f"({c})∂{k}" for k, c in enumerate(self.coeffs) if c != 0]
        return f"{self.name or 'X'} = " + (" + ".join(terms) if terms else "0")

    @classmethod
    def coordinate(cls, dim: int, k: int, name: str = "") -> "PolyVectorField":
        return cls(tuple(sp.Integer(1 if i == k else 0) for i in range(dim)), name or f"d{k}")


@dataclass(frozen=True)
class Frame:
    """X₁..X_m and the drift X_{m+1} (absent for pure Carnot groups)."""

    horizontal: Tuple[PolyVectorField, ...]
    drift: PolyVectorField | None = None

    def __post_init__(self) -> None:
        dims = {f.dim for f in self.fields}
        if len(dims) != 1:
            raise DimensionError("frame fields", min(dims), max(dims))

    @property
    def m(self) -> int:
        return len(self.horizontal)

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    @property
    def fields(self) -> Tuple[PolyVectorField, ...]:
        return self.horizontal + ((self.drift,) if self.drift is not None else ())

    def matrix(self, z: Any) -> np.ndarray:
        """Rows are the frame fields at z: shape (..., m+1, dim)."""
        return np.stack([f(z) for f in self.fields], axis=-2)


# ---------- Brackets ----------

def lie_bracket(a: PolyVectorField, b: PolyVectorField) -> PolyVectorField:
    """[a,b]_k = a(b_k) − b(a_k)."""
    if a.dim != b.dim:
        raise DimensionError("lie_bracket", a.dim, b.dim)
    name = f"[{a.name},{b.name}]" if a.name and b.name else ""
    return PolyVectorField(tuple(a.apply(bk) - b.apply(ak) for ak, bk in zip(a.coeffs, b.coeffs)), name)


def bracket_levels(gens: Sequence[PolyVectorField], depth: int) -> List[List[PolyVectorField]]:
    """levels[0] = gens; levels[k] = nonzero [g, W] for g in gens, W in levels[k-1]."""
    if depth < 1:
        raise DomainError("depth", depth, "need depth ≥ 1")
    levels = [list(gens)]
    for _ in range(depth - 1):
        nxt = []
        for g in gens:
            for w in levels[-1]:
                br = lie_bracket(g, w)
                if not br.is_zero():
                    nxt.append(br)
        levels.append(nxt)
    return levels


def bracket_table(fr: Frame) -> Dict[Tuple[str, str], PolyVectorField]:
    out: Dict[Tuple[str, str], PolyVectorField] = {}
    fs = fr.fields
    for i in range(len(fs)):
        for j in range(i + 1, len(fs)):
            out[(fs[i].name, fs[j].name)] = lie_bracket(fs[i], fs[j])
    return out


def hormander_rank(fr: Frame, z: Any, depth: int) -> int:
    """Rank of the span of all iterated brackets up to `depth` at z."""
    z = np.asarray(z, dtype=float)
    vecs = [f(z) for level in bracket_levels(fr.fields, depth) for f in level]
    M = np.stack(vecs)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv >= RANK_REL_TOL * sv[0]))


def stratification_depth(fr: Frame, max_depth: int = 8) -> int:
    """Longest nonvanishing bracket length among the frame fields."""
    levels = bracket_levels(fr.fields, max_depth)
    depth = 0
    for k, level in enumerate(levels, start=1):
        if any(not f.is_zero() for f in level):
            depth = k
    return depth


def jacobi_residual(a: PolyVectorField, b: PolyVectorField, c: PolyVectorField) -> PolyVectorField:
    return (lie_bracket(a, lie_bracket(b, c))
            + lie_bracket(b, lie_bracket(c, a))
            + lie_bracket(c, lie_bracket(a, b)))


def coordinate_divergence(f: PolyVectorField) -> sp.Expr:
    return sp.expand(sum(sp.diff(c, s) for c, s in zip(f.coeffs, f.syms)))


def is_pyramid(g: GroupSpec, f: PolyVectorField) -> bool:
    """Coefficient of a layer-i coordinate depends only on coordinates of layers < i."""
    syms = f.syms
    for k, c in enumerate(f.coeffs):
        lower = {syms[i] for i, e in enumerate(g.dilation_exps) if e < g.dilation_exps[k]}
        if not c.free_symbols <= lower:
            return False
    return True


# ---------- Frames from a group law ----------

def group_frame(g: GroupSpec) -> Frame:
    """
    Left-invariant frame of g: the field attached to coordinate k is column k
    of ∂(z∘w)/∂w at w = 0; the drift is minus the field of t.
    """
    if not g.horizontal:
        raise DomainError("group", g.name, "no horizontal coordinates declared")
    horiz = tuple(PolyVectorField(g.left_invariant_coeffs(k), f"X{i + 1}") for i, k in enumerate(g.horizontal))
    drift = None
    if g.time_index is not None:
        drift = PolyVectorField(tuple(-c for c in g.left_invariant_coeffs(g.time_index)), f"X{len(horiz) + 1}")
    return Frame(horiz, drift)


# ---------- Invariance / homogeneity ----------

class FieldReport(BaseModel):
    group: str
    samples: int
    seed: int
    invariance: float
    homogeneity: float
    tol: float
    passed: bool


def check_invariance_homogeneity(
    g: GroupSpec, fr: Frame, samples: int = 200, seed: int = 0, tol: float = AXIOM_TOL,
) -> FieldReport:
    """
    Left invariance: d(ℓ_ζ)_z X(z) = X(ζ∘z), with the differential of ℓ_ζ
    taken from the exact law. Degree-one homogeneity: φ_k(δ_λ z) = λ^{e_k−1} φ_k(z).
    """
    if fr.dim != g.dim:
        raise DimensionError("frame", g.dim, fr.dim)
    rng = stream(seed, 2)
    Zeta, Z = rng.standard_normal((2, samples, g.dim))
    lam = rng.uniform(0.25, 4.0, size=samples)
    exps = np.asarray(g.dilation_exps, dtype=float)

    jac = _eval_vector(g._jacobian_w_fn, (samples,), *Zeta.T, *Z.T).reshape(samples, g.dim, g.dim)
    moved = compose(g, Zeta, Z)
    dil = Z * np.power(lam[:, None], exps)
    inv_res, hom_res = 0.0, 0.0
    for f in fr.fields:
        fz = f(Z)
        pushed = np.einsum("nij,nj->ni", jac, fz)
        there = f(moved)
        inv_res = max(inv_res, float(np.max(np.abs(pushed - there) / (1.0 + np.abs(there)))))
        expected = np.power(lam[:, None], exps - 1.0) * fz
        got = f(dil)
        hom_res = max(hom_res, float(np.max(np.abs(got - expected) / (1.0 + np.abs(expected)))))

    passed = max(inv_res, hom_res) <= tol
    logger.debug(f"[fields] {g.name}: invariance={inv_res:.2e} homogeneity={hom_res:.2e}")
    return FieldReport(group=g.name, samples=samples, seed=seed, invariance=inv_res,
                       homogeneity=hom_res, tol=tol, passed=passed)


# ---------- Lie derivative along the flow ----------

def _rk4_flow(f: PolyVectorField, z0: np.ndarray, s: float, steps: int) -> np.ndarray:
    h = s / steps
    z = z0.astype(float).copy()
    for _ in range(steps):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


def flow_derivative(
    f: PolyVectorField, u: Callable[[np.ndarray], Any], z0: Any, h: float = 1e-3, steps: int = 8,
) -> float:
    """d/ds u(γ(s)) at s = 0 with γ' = X(γ), γ(0) = z0 (fourth-order difference)."""
    z0 = np.asarray(z0, dtype=float)
    vals = {k: float(u(_rk4_flow(f, z0, k * h, steps))) for k in (-2, -1, 1, 2)}
    return (-vals[2] + 8.0 * vals[1] - 8.0 * vals[-1] + vals[-2]) / (12.0 * h)


# ---------- Sparse (de)serialization ----------

def field_to_sparse(f: PolyVectorField) -> Dict[str, Any]:
    """{"name", "dim", "coeffs": [{"e0,e1,..": "p/q"}, ...]} with one map per coordinate."""
    out: List[Dict[str, str]] = []
    for c in f.coeffs:
        terms: Dict[str, str] = {}
        if c != 0:
            for monom, coef in sp.Poly(c, *f.syms).terms():
                terms[",".join(str(e) for e in monom)] = str(sp.Rational(coef))
        out.append(terms)
    return {"name": f.name, "dim": f.dim, "coeffs": out}


def field_from_sparse(cfg: Dict[str, Any]) -> PolyVectorField:
    dim = int(cfg["dim"])
    syms = coordinate_symbols(dim, "z")
    coeffs = []
    for terms in cfg["coeffs"]:
        expr = sp.Integer(0)
        for key, coef in (terms or {}).items():
            exps = [int(e) for e in key.split(",")]
            if len(exps) != dim:
                raise DimensionError("monomial exponents", dim, len(exps))
            expr += sp.Rational(coef) * sp.Mul(*[s ** e for s, e in zip(syms, exps)])
        coeffs.append(expr)
    if len(coeffs) != dim:
        raise DimensionError("field coefficients", dim, len(coeffs))
    return PolyVectorField(tuple(coeffs), str(cfg.get("name", "")))
