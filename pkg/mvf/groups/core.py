# mvf/groups/core.py
"""
Homogeneous Lie groups on R^{N+1} given by exact polynomial laws.

A group is a `GroupSpec`: per-coordinate dilation exponents (the layer of a
coordinate is its exponent, t sits last in layer 1) and a composition law
z∘w stored as sympy expressions with rational coefficients in the symbols
z0.., w0... Points are plain numpy vectors of length `dim`; every operation
also accepts stacks of shape (..., dim).

Public API:
    GroupSpec, identity, compose, inverse, dilate, dilation_matrix,
    norm_inf, dist_inf, check_axioms, calibrate_eps, AxiomReport,
    EpsCalibration, group_to_config, group_from_config
"""

from __future__ import annotations
import dataclasses
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import sympy as sp
from pydantic import BaseModel, Field

from mvf.config.settings import AXIOM_TOL
from mvf.errors import ConvergenceError, DimensionError, DomainError
from mvf.utils.logger import logger
from mvf.utils.rng import stream


def coordinate_symbols(n: int, prefix: str = "z") -> Tuple[sp.Symbol, ...]:
    return tuple(sp.symbols(f"{prefix}0:{n}"))


def _lambdify_vector(args: Sequence[sp.Symbol], exprs: Sequence[sp.Expr]) -> Callable[..., Any]:
    return sp.lambdify(list(args), list(exprs), modules="numpy")


def _eval_vector(fn: Callable[..., Any], shape: Tuple[int, ...], *cols: np.ndarray) -> np.ndarray:
    """Evaluate a lambdified vector map column-wise and stack to (..., k)."""
    out = fn(*cols)
    return np.stack([np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out], axis=-1)


@dataclass(frozen=True, eq=False)
class GroupSpec:
    name: str
    dilation_exps: Tuple[int, ...]
    law: Tuple[sp.Expr, ...]
    eps_weights: Tuple[float, ...] = ()
    horizontal: Tuple[int, ...] = ()
    time_index: int | None = None

    def __post_init__(self) -> None:
        exps = tuple(int(e) for e in self.dilation_exps)
        if not exps or min(exps) < 1:
            raise DomainError("dilation_exps", self.dilation_exps, "exponents must be positive integers")
        depth = max(exps)
        missing = [j for j in range(1, depth + 1) if j not in exps]
        if missing:
            raise DomainError("dilation_exps", exps, f"layers {missing} are empty")
        if len(self.law) != len(exps):
            raise DimensionError("group law", len(exps), len(self.law))
        law = tuple(sp.expand(sp.sympify(e)) for e in self.law)
        eps = tuple(float(e) for e in self.eps_weights) or (1.0,) * depth
        if len(eps) != depth:
            raise DimensionError("eps_weights", depth, len(eps))
        if eps[0] != 1.0 or any(not (0.0 < e <= 1.0) for e in eps):
            raise DomainError("eps_weights", eps, "need eps_1 = 1 and eps_j in (0, 1]")
        if self.time_index is not None and not (0 <= self.time_index < len(exps) and exps[self.time_index] == 1):
            raise DomainError("time_index", self.time_index, "t must be a layer-1 coordinate")
        object.__setattr__(self, "dilation_exps", exps)
        object.__setattr__(self, "law", law)
        object.__setattr__(self, "eps_weights", eps)
        object.__setattr__(self, "horizontal", tuple(int(i) for i in self.horizontal))

    # ---------- shape ----------

    @property
    def dim(self) -> int:
        return len(self.dilation_exps)

    @property
    def depth(self) -> int:
        return max(self.dilation_exps)

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        return tuple(self.dilation_exps.count(j) for j in range(1, self.depth + 1))

    @property
    def homogeneous_dim(self) -> int:
        return sum(j * m for j, m in enumerate(self.layer_dims, start=1))

    def layer_indices(self, j: int) -> Tuple[int, ...]:
        return tuple(k for k, e in enumerate(self.dilation_exps) if e == j)

    @cached_property
    def z_syms(self) -> Tuple[sp.Symbol, ...]:
        return coordinate_symbols(self.dim, "z")

    @cached_property
    def w_syms(self) -> Tuple[sp.Symbol, ...]:
        return coordinate_symbols(self.dim, "w")

    # ---------- compiled maps ----------

    @cached_property
    def _law_fn(self) -> Callable[..., Any]:
        return _lambdify_vector(self.z_syms + self.w_syms, self.law)

    @cached_property
    def jacobian_w(self) -> sp.Matrix:
        """∂(z∘w)/∂w as a symbolic matrix in (z, w)."""
        return sp.Matrix(self.law).jacobian(sp.Matrix(self.w_syms))

    @cached_property
    def _jacobian_w_fn(self) -> Callable[..., Any]:
        flat = list(self.jacobian_w)
        return _lambdify_vector(self.z_syms + self.w_syms, flat)

    def left_invariant_coeffs(self, k: int) -> Tuple[sp.Expr, ...]:
        """Coefficients of the left-invariant field equal to ∂_k at the origin."""
        at_zero = {w: 0 for w in self.w_syms}
        return tuple(sp.expand(self.jacobian_w[i, k].subs(at_zero)) for i in range(self.dim))

    def with_eps(self, eps_weights: Sequence[float]) -> "GroupSpec":
        return dataclasses.replace(self, eps_weights=tuple(eps_weights))

    def __repr__(self) -> str:
        return f"GroupSpec({self.name!r}, layers={self.layer_dims}, Q={self.homogeneous_dim})"


# ---------- Point helpers ----------

def as_points(g: GroupSpec, z: Any, what: str = "point") -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != g.dim:
        raise DimensionError(what, g.dim, 0 if arr.ndim == 0 else arr.shape[-1])
    return arr


def identity(g: GroupSpec) -> np.ndarray:
    return np.zeros(g.dim)


# ---------- Operations ----------

def compose(g: GroupSpec, z: Any, w: Any) -> np.ndarray:
    """z∘w evaluated with the stored polynomial law (broadcasts over stacks)."""
    z = as_points(g, z, "left operand")
    w = as_points(g, w, "right operand")
    shape = np.broadcast_shapes(z.shape[:-1], w.shape[:-1])
    return _eval_vector(g._law_fn, shape, *np.moveaxis(z, -1, 0), *np.moveaxis(w, -1, 0))


def inverse(g: GroupSpec, z: Any, tol: float = 1e-12) -> np.ndarray:
    """
    Solve z∘w = 0 layer by layer. For a graded law the component of layer j
    is z_j + w_j + P_j(z, w_<j), so the update w <- w - z∘w fixes one more
    layer per sweep; `depth` sweeps reach the exact inverse.
    """
    z = as_points(g, z)
    w = -z.copy()
    scale = max(1.0, float(np.max(np.abs(z)))) ** g.depth if z.size else 1.0
    err = np.inf
    for it in range(g.depth + 2):
        res = compose(g, z, w)
        err = float(np.max(np.abs(res))) if res.size else 0.0
        if err <= tol * scale:
            return w
        w = w - res
    raise ConvergenceError(f"inverse in {g.name}", g.depth + 2, err)


def dilate(g: GroupSpec, lam: float, z: Any) -> np.ndarray:
    if not np.isscalar(lam) or not np.isfinite(lam) or lam <= 0:
        raise DomainError("lambda", lam, "dilations need lambda > 0")
    z = as_points(g, z)
    return z * np.power(float(lam), np.asarray(g.dilation_exps, dtype=float))


def dilation_matrix(g: GroupSpec, lam: float) -> np.ndarray:
    return np.diag(dilate(g, lam, np.ones(g.dim)))


def norm_inf(g: GroupSpec, z: Any) -> np.ndarray | float:
    """max_j ε_j |z_(j)|^{1/j}, |z_(j)| the Euclidean norm of layer j."""
    z = as_points(g, z)
    parts = []
    for j in range(1, g.depth + 1):
        sub = z[..., list(g.layer_indices(j))]
        parts.append(g.eps_weights[j - 1] * np.linalg.norm(sub, axis=-1) ** (1.0 / j))
    out = np.max(np.stack(parts, axis=-1), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dist_inf(g: GroupSpec, z: Any, w: Any) -> np.ndarray | float:
    """d_∞(z, w) = ‖w⁻¹∘z‖_∞."""
    return norm_inf(g, compose(g, inverse(g, w), z))


# ---------- Axiom checks ----------

class AxiomReport(BaseModel):
    group: str
    samples: int
    seed: int
    associativity: float = Field(..., description="max relative residual of (z∘w)∘v vs z∘(w∘v)")
    identity: float
    inverse: float
    automorphism: float = Field(..., description="max relative residual of δ_λ(z∘w) vs δ_λz∘δ_λw")
    tol: float
    passed: bool


def _rel_residual(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def check_axioms(g: GroupSpec, samples: int = 1000, seed: int = 0, tol: float = AXIOM_TOL) -> AxiomReport:
    if samples < 1:
        raise DomainError("samples", samples, "need at least one sample")
    rng = stream(seed, 0)
    Z, W, V = rng.standard_normal((3, samples, g.dim))
    lam = rng.uniform(0.25, 4.0, size=samples)
    origin = identity(g)

    assoc = _rel_residual(compose(g, compose(g, Z, W), V), compose(g, Z, compose(g, W, V)))
    ident = max(_rel_residual(compose(g, Z, origin), Z), _rel_residual(compose(g, origin, Z), Z))
    try:
        Zi = inverse(g, Z)
        inv = max(_rel_residual(compose(g, Z, Zi), np.zeros_like(Z)),
                  _rel_residual(compose(g, Zi, Z), np.zeros_like(Z)))
    except ConvergenceError as e:
        logger.warning(f"[axioms] {g.name}: {e}")
        inv = float("inf")
    scale = np.power(lam[:, None], np.asarray(g.dilation_exps, dtype=float))
    auto = _rel_residual(scale * compose(g, Z, W), compose(g, scale * Z, scale * W))

    passed = max(assoc, ident, inv, auto) <= tol
    logger.debug(f"[axioms] {g.name}: assoc={assoc:.2e} id={ident:.2e} inv={inv:.2e} auto={auto:.2e}")
    return AxiomReport(
        group=g.name, samples=samples, seed=seed, associativity=assoc, identity=ident,
        inverse=inv, automorphism=auto, tol=tol, passed=passed,
    )


class EpsCandidate(BaseModel):
    eps_weights: List[float]
    violations: int


class EpsCalibration(BaseModel):
    group: str
    samples: int
    seed: int
    candidates: List[EpsCandidate]
    best: EpsCandidate


def calibrate_eps(
    g: GroupSpec,
    grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
    samples: int = 500,
    seed: int = 0,
) -> EpsCalibration:
    """
    Grid search over ε_2..ε_μ (ε_1 = 1) counting triangle-inequality
    violations d(z,v) > d(z,w) + d(w,v) on seeded triples. Zero violations
    is evidence, not a certificate, that d_∞ is a true distance.
    """
    rng = stream(seed, 1)
    Z, W, V = rng.standard_normal((3, samples, g.dim))
    cands: List[EpsCandidate] = []
    for tail in itertools.product(grid, repeat=g.depth - 1):
        gw = g.with_eps((1.0,) + tuple(tail))
        lhs = dist_inf(gw, Z, V)
        rhs = dist_inf(gw, Z, W) + dist_inf(gw, W, V)
        bad = int(np.count_nonzero(lhs > rhs * (1.0 + 1e-12) + 1e-12))
        cands.append(EpsCandidate(eps_weights=list(gw.eps_weights), violations=bad))
    # fewest violations; ties go to the largest weights (least distortion)
    best = min(cands, key=lambda c: (c.violations, [-e for e in c.eps_weights]))
    logger.info(f"[calibrate_eps] {g.name}: best {best.eps_weights} with {best.violations} violations")
    return EpsCalibration(group=g.name, samples=samples, seed=seed, candidates=cands, best=best)


# ---------- Config round trip ----------

def group_to_config(g: GroupSpec) -> Dict[str, Any]:
    return {
        "name": g.name,
        "dilation_exps": list(g.dilation_exps),
        "law": [sp.sstr(e) for e in g.law],
        "eps_weights": list(g.eps_weights),
        "horizontal": list(g.horizontal),
        "time_index": g.time_index,
    }


def group_from_config(cfg: Dict[str, Any]) -> GroupSpec:
    exps = tuple(int(e) for e in cfg["dilation_exps"])
    n = len(exps)
    names = {str(s): s for s in coordinate_symbols(n, "z") + coordinate_symbols(n, "w")}
    law = tuple(sp.sympify(str(e), locals=names, rational=True) for e in cfg["law"])
    return GroupSpec(
        name=str(cfg.get("name", "custom")),
        dilation_exps=exps,
        law=law,
        eps_weights=tuple(cfg.get("eps_weights") or ()),
        horizontal=tuple(cfg.get("horizontal") or ()),
        time_index=cfg.get("time_index"),
    )
