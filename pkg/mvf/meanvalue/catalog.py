# mvf/meanvalue/catalog.py
"""
Built-in solutions u with their right-hand sides f = ℒu and truth values
u(z₀), plus compactly supported test bumps.

Solution ids: const, const(c), x_i (1-based first-layer coordinate), y+xt,
x2+2t, expr(<polynomial in x1..xN, t>), gamma_pole(ζ_1, ..., ζ_N, ζ_t).
Bump ids: zero, bump(a) (radius a, centered at the origin).
"""

from __future__ import annotations
import re
from dataclasses import dataclass
from typing import Any, Callable, Optional, Tuple

import numpy as np
import sympy as sp

from mvf.errors import ConfigError, DomainError
from mvf.groups.core import coordinate_symbols
from mvf.kernels.geometry import LevelBall
from mvf.kernels.kolmo import OperatorSpec, gamma_eval
from mvf.meanvalue.identities import apply_operator

RE_CALL = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$", re.S)

Evaluable = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Solution:
    id: str
    u: Evaluable
    f: Optional[Evaluable]           # None when ℒu = 0 identically
    expr: Optional[sp.Expr] = None
    pole: Optional[np.ndarray] = None

    def truth(self, z0: Any) -> float:
        """u(z₀) by direct substitution (symbolic when available)."""
        z0 = np.asarray(z0, dtype=float)
        if self.expr is not None:
            syms = coordinate_symbols(len(z0), "z")
            return float(self.expr.subs({s: sp.Float(v, 30) for s, v in zip(syms, z0)}))
        return float(np.asarray(self.u(z0[None]), dtype=float).reshape(-1)[0])

    @property
    def is_constant(self) -> bool:
        return self.expr is not None and not self.expr.free_symbols

    def check_admissible(self, ball: LevelBall, margin: float = 0.1) -> None:
        """A pole of u must lie below t₀ − (1 + margin)Δ."""
        if self.pole is None:
            return
        limit = ball.t0 - (1.0 + margin) * ball.time_extent
        if self.pole[-1] > limit:
            raise DomainError("gamma_pole", self.pole.tolist(), f"pole time must be ≤ {limit:.6g} for r={ball.r}")


def _from_expr(op: OperatorSpec, sid: str, expr: sp.Expr) -> Solution:
    z = coordinate_symbols(op.dim, "z")
    expr = sp.expand(expr)
    f_expr = apply_operator(op, expr)
    u_fn = sp.lambdify(z, expr, modules="numpy")
    f_fn = sp.lambdify(z, f_expr, modules="numpy")

    def u(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.asarray(u_fn(*np.moveaxis(pts, -1, 0)), dtype=float), pts.shape[:-1]).copy()

    def f(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.asarray(f_fn(*np.moveaxis(pts, -1, 0)), dtype=float), pts.shape[:-1]).copy()

    return Solution(id=sid, u=u, f=None if f_expr == 0 else f, expr=expr)


def _parse_numbers(raw: str, what: str, count: int | None = None) -> Tuple[float, ...]:
    try:
        nums = tuple(float(sp.Rational(a.strip())) for a in raw.split(",") if a.strip())
    except (TypeError, ValueError, sp.SympifyError) as e:
        raise ConfigError(f"bad arguments for {what}", [f"{what}: {raw!r}"]) from e
    if count is not None and len(nums) != count:
        raise ConfigError(f"{what} takes {count} argument(s), got {len(nums)}", [f"{what}: {raw!r}"])
    return nums


def solution_from_id(op: OperatorSpec, sid: str) -> Solution:
    z = coordinate_symbols(op.dim, "z")
    N, m0 = op.N, op.kspec.m0
    key = sid.replace(" ", "").replace("²", "2").replace("^", "").replace("**", "")
    if key == "const":
        return _from_expr(op, sid, sp.Integer(1))
    m = re.fullmatch(r"x_?(\d+)", key)
    if m:
        i = int(m.group(1))
        if not (1 <= i <= m0):
            raise ConfigError(f"{sid}: index outside the first layer", [f"solution: 1 ≤ i ≤ {m0}"])
        return _from_expr(op, sid, z[i - 1])
    if key == "y+xt":
        if op.kspec.kappa < 1:
            raise ConfigError(f"{sid} needs a Kolmogorov operator with κ ≥ 1", [f"solution: {sid!r}"])
        return _from_expr(op, sid, z[m0] + z[0] * z[N])
    if key == "x2+2t":
        return _from_expr(op, sid, z[0] ** 2 + 2 * z[N])

    call = RE_CALL.match(sid)
    if call:
        name, raw = call.group(1), call.group(2)
        if name == "const":
            (c,) = _parse_numbers(raw, "const", 1) if raw.strip() else (1.0,)
            return _from_expr(op, sid, sp.nsimplify(c, rational=True))
        if name == "expr":
            names = {f"x{k + 1}": z[k] for k in range(N)}
            names["t"] = z[N]
            try:
                expr = sp.sympify(raw, locals=names, rational=True)
            except (sp.SympifyError, SyntaxError, TypeError) as e:
                raise ConfigError(f"unparseable expression in {sid!r}", [str(e)]) from e
            if not expr.free_symbols <= set(z) or not expr.is_polynomial(*z):
                raise ConfigError(f"{sid}: expected a polynomial in x1..x{N}, t", [f"solution: {sid!r}"])
            return _from_expr(op, sid, expr)
        if name == "gamma_pole":
            zeta = np.asarray(_parse_numbers(raw, "gamma_pole"))
            if zeta.shape != (op.dim,):
                raise ConfigError(f"{sid}: pole needs {op.dim} coordinates", [f"solution: got {zeta.size}"])
            return gamma_pole(op, zeta, sid)

    raise ConfigError(f"unknown solution id {sid!r}",
                      ["solution: known ids are const, const(c), x_i, y+xt, x2+2t, expr(...), gamma_pole(...)"])


def gamma_pole(op: OperatorSpec, zeta: Any, sid: str | None = None) -> Solution:
    """u(z) = Γ(z; ζ), which solves ℒu = 0 for t > t_ζ."""
    zeta = np.asarray(zeta, dtype=float)

    def u(pts: np.ndarray) -> np.ndarray:
        return gamma_eval(op, zeta, pts, grad=False).value

    return Solution(id=sid or f"gamma_pole({','.join(f'{v:g}' for v in zeta)})", u=u, f=None, pole=zeta)


# ---------- Test bumps ----------

def bump(a: float = 1.0) -> Evaluable:
    """exp(−1/(1 − |x|²/a²)) inside |x| < a, 0 outside."""
    if a <= 0:
        raise DomainError("a", a, "bump radius must be positive")

    def phi(x: np.ndarray) -> np.ndarray:
        q = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) / (a * a)
        inside = q < 1.0
        return np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - q, 1.0)), 0.0)

    return phi


def bump_from_id(bid: str) -> Evaluable:
    key = bid.replace(" ", "")
    if key == "zero":
        return lambda x: np.zeros(np.asarray(x).shape[:-1])
    if key == "bump":
        return bump(1.0)
    call = RE_CALL.match(key)
    if call and call.group(1) == "bump":
        (a,) = _parse_numbers(call.group(2), "bump", 1)
        try:
            return bump(a)
        except DomainError as e:
            raise ConfigError(f"invalid test function id {bid!r}", [f"phi: {e}"]) from e
    raise ConfigError(f"unknown test function id {bid!r}", ["phi: known ids are zero, bump, bump(a)"])
