# mvf/groups/catalog.py
"""
Bundled groups and the group-id parser used by the CLI and scenarios.

Ids: euclidean(N), heat(N), heisenberg(n), heisenberg_heat(n), engel,
engel_heat, kolmogorov(m0,m1,...), plus the short names in BUNDLED.
"""

from __future__ import annotations
import re
from typing import Dict, List, Sequence, Tuple

import sympy as sp

from mvf.errors import ConfigError, DomainError
from mvf.groups.core import GroupSpec, coordinate_symbols
from mvf.kernels.kolmo import KolmogorovSpec

RE_GROUP_ID = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([\d\s,]*)\s*\))?\s*$")


def _sum_law(n: int) -> Tuple[sp.Expr, ...]:
    z, w = coordinate_symbols(n, "z"), coordinate_symbols(n, "w")
    return tuple(a + b for a, b in zip(z, w))


def euclidean(N: int) -> GroupSpec:
    """(R^N, +) with all coordinates in layer 1 and no time variable."""
    return GroupSpec(f"euclidean({N})", (1,) * N, _sum_law(N), horizontal=tuple(range(N)))


def heat(N: int) -> GroupSpec:
    return GroupSpec(f"heat({N})", (1,) * (N + 1), _sum_law(N + 1), horizontal=tuple(range(N)), time_index=N)


def _heisenberg_law(n: int, extra: int, coeff: sp.Rational = sp.Integer(2)) -> Tuple[sp.Expr, ...]:
    dim = 2 * n + 1 + extra
    z, w = coordinate_symbols(dim, "z"), coordinate_symbols(dim, "w")
    law: List[sp.Expr] = [z[i] + w[i] for i in range(2 * n)]
    s = z[2 * n] + w[2 * n] + coeff * sum(w[j] * z[n + j] - z[j] * w[n + j] for j in range(n))
    law.append(s)
    law += [z[i] + w[i] for i in range(2 * n + 1, dim)]
    return tuple(law)


def heisenberg(n: int = 1) -> GroupSpec:
    """H^n on (x, y, s): s∘s' = s + s' + 2Σ(x'_j y_j − x_j y'_j)."""
    return GroupSpec(f"heisenberg({n})", (1,) * (2 * n) + (2,), _heisenberg_law(n, 0),
                     horizontal=tuple(range(2 * n)))


def heisenberg_heat(n: int = 1) -> GroupSpec:
    """H^n × R with t last in layer 1."""
    return GroupSpec(f"heisenberg_heat({n})", (1,) * (2 * n) + (2, 1), _heisenberg_law(n, 1),
                     horizontal=tuple(range(2 * n)), time_index=2 * n + 1)


def _engel_law(extra: int) -> Tuple[sp.Expr, ...]:
    dim = 4 + extra
    z, w = coordinate_symbols(dim, "z"), coordinate_symbols(dim, "w")
    law = [
        z[0] + w[0],
        z[1] + w[1],
        z[2] + w[2] + z[0] * w[1],
        z[3] + w[3] + z[0] * w[2] + z[0] ** 2 * w[1] / 2,
    ]
    law += [z[i] + w[i] for i in range(4, dim)]
    return tuple(law)


def engel() -> GroupSpec:
    """Step-3 Carnot group with layers (2, 1, 1)."""
    return GroupSpec("engel", (1, 1, 2, 3), _engel_law(0), horizontal=(0, 1))


def engel_heat() -> GroupSpec:
    return GroupSpec("engel_heat", (1, 1, 2, 3, 1), _engel_law(1), horizontal=(0, 1), time_index=4)


def kolmogorov(k: KolmogorovSpec) -> GroupSpec:
    """
    (x,t)∘(ξ,τ) = (ξ + E(τ)x, t + τ) with E(τ) = exp(−τB) taken from the
    exact terminating series. Block j of x has dilation exponent j+1.
    """
    N = k.N
    z, w = coordinate_symbols(N + 1, "z"), coordinate_symbols(N + 1, "w")
    E = k.expm_symbolic(w[N])
    zx = sp.Matrix(z[:N])
    moved = E * zx
    law = tuple(sp.expand(w[i] + moved[i]) for i in range(N)) + (z[N] + w[N],)
    exps = tuple(j + 1 for j in k.block_of) + (1,)
    label = ",".join(str(m) for m in k.m_dims)
    return GroupSpec(f"kolmogorov({label})", exps, law, horizontal=tuple(range(k.m0)), time_index=N)


def _args(raw: str | None) -> List[int]:
    if not raw or not raw.strip():
        return []
    return [int(a) for a in raw.split(",") if a.strip()]


def group_from_id(group_id: str) -> GroupSpec:
    group_id = BUNDLED.get((group_id or "").strip(), group_id)
    m = RE_GROUP_ID.match(group_id or "")
    if not m:
        raise ConfigError(f"malformed group id {group_id!r}", [f"group: {group_id!r}"])
    name, args = m.group(1), _args(m.group(2))
    try:
        if name in ("euclidean", "heat"):
            if len(args) != 1:
                raise ConfigError(f"{name} takes one argument N", [f"group: {group_id!r}"])
            return euclidean(args[0]) if name == "euclidean" else heat(args[0])
        if name in ("heisenberg", "heisenberg_heat"):
            n = args[0] if args else 1
            return heisenberg(n) if name == "heisenberg" else heisenberg_heat(n)
        if name == "engel":
            return engel()
        if name == "engel_heat":
            return engel_heat()
        if name == "kolmogorov":
            if not args:
                raise ConfigError("kolmogorov needs block sizes m0,m1,...", [f"group: {group_id!r}"])
            return kolmogorov(KolmogorovSpec.canonical(args))
    except DomainError as e:
        raise ConfigError(f"invalid group id {group_id!r}", [str(e)]) from e
    raise ConfigError(f"unknown group id {group_id!r}", [f"group: known ids are {', '.join(KNOWN_IDS)}"])


KNOWN_IDS: Sequence[str] = (
    "euclidean(N)", "heat(N)", "heisenberg(n)", "heisenberg_heat(n)",
    "engel", "engel_heat", "kolmogorov(m0,m1,...)",
)

BUNDLED: Dict[str, str] = {
    "heisenberg_heat_1": "heisenberg_heat(1)",
    "heisenberg_heat_2": "heisenberg_heat(2)",
    "kolmogorov_1": "kolmogorov(1,1)",
    "kolmogorov_chain": "kolmogorov(1,1,1)",
    "engel_heat": "engel_heat",
    "heat_2": "heat(2)",
}
