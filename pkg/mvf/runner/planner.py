# mvf/runner/planner.py
"""
Scenario files: schema, parsing and resolution into a plan.

A scenario is JSON with `"schema": 1`, an id, a default operator and a list
of checks. Every check names its kind, carries its own id, and carries an
explicit seed wherever it samples. Parsing converts JSON and validation
problems into ConfigError diagnostics (line/column or field path).

Public API:
    Scenario, OperatorModel, MCModel, Check, PlanStep, Plan,
    load_scenario, parse_scenario, plan_from_scenario
"""

from __future__ import annotations
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mvf.config.settings import AXIOM_TOL, GUARD_REL
from mvf.errors import ConfigError, MVFError
from mvf.groups.catalog import group_from_id
from mvf.groups.core import GroupSpec
from mvf.integrate.estimate import MCConfig
from mvf.kernels.kolmo import KolmogorovSpec, OperatorSpec
from mvf.meanvalue.catalog import bump_from_id, solution_from_id
from mvf.utils.logger import logger

Point = List[float]


# ---------- Building blocks ----------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OperatorModel(_Strict):
    m_dims: List[int] = Field(..., min_length=1, description="block sizes m0 ≥ m1 ≥ ...")
    blocks: Optional[List[List[List[Union[float, str]]]]] = Field(None, description="B_j blocks; canonical when omitted")
    diffusion: Union[float, List[List[float]]] = 1.0
    b: Optional[List[float]] = None
    c: float = 0.0

    def build(self) -> OperatorSpec:
        k = KolmogorovSpec.from_blocks(self.m_dims, self.blocks) if self.blocks is not None \
            else KolmogorovSpec.canonical(self.m_dims)
        return OperatorSpec(k, diffusion=self.diffusion, b=None if self.b is None else tuple(self.b), c=self.c)


class MCModel(_Strict):
    samples: int = Field(..., ge=2)
    seed: int
    batches: int = Field(32, ge=2)
    stratify_slices: int = Field(16, ge=1)
    antithetic: bool = False
    guard_rel: float = Field(GUARD_REL, ge=0.0, lt=1.0)
    grid_points: int = Field(2048, ge=64)

    def config(self, workers: int = 1, samples_scale: float = 1.0) -> MCConfig:
        cfg = MCConfig(
            samples=self.samples, seed=self.seed, batches=self.batches, stratify_slices=self.stratify_slices,
            antithetic=self.antithetic, guard_rel=self.guard_rel, grid_points=self.grid_points, workers=workers,
        )
        return cfg.scaled(samples_scale) if samples_scale != 1.0 else cfg


class _CheckBase(_Strict):
    id: str = Field(..., min_length=1)
    operator: Optional[OperatorModel] = Field(None, description="overrides the scenario operator")
    group: Optional[str] = Field(None, description="overrides the scenario group")


# ---------- Check kinds ----------

class GroupAxiomsCheck(_CheckBase):
    kind: Literal["group_axioms"]
    samples: int = Field(1000, ge=1)
    seed: int
    tol: float = AXIOM_TOL


class GroupFieldsCheck(_CheckBase):
    kind: Literal["group_fields"]
    samples: int = Field(100, ge=1)
    seed: int
    depth: int = Field(4, ge=1)
    tol: float = AXIOM_TOL


class NormalizationCheck(_CheckBase):
    kind: Literal["normalization"]
    pole: Point
    times: List[float] = Field(..., min_length=1)
    order: int = Field(8, ge=2)
    tol: float = 1e-10


class PDEResidualCheck(_CheckBase):
    kind: Literal["pde_residual"]
    pole: Point
    samples: int = Field(100, ge=1)
    seed: int
    h: float = Field(1e-3, gt=0)
    tol: float = 1e-5


class HomogeneityCheck(_CheckBase):
    kind: Literal["homogeneity"]
    samples: int = Field(100, ge=1)
    seed: int
    lambdas: List[float] = Field(default_factory=lambda: [0.5, 2.0, 3.0])
    tol: float = 1e-9


class DecayCheck(_CheckBase):
    kind: Literal["claim2_decay"]
    pole: Point
    r: float = Field(..., gt=0)
    k_min: int = 4
    k_max: int = 14
    final_eps: float = Field(2.0 ** -40, gt=0)
    tol: float = 1e-3


class KernelNormalizationCheck(_CheckBase):
    kind: Literal["kernel_normalization"]
    pole: Point
    r: float = Field(..., gt=0)
    alpha: float = Field(2.0, gt=1.0)
    method: Literal["mc", "quadrature", "surface"] = "mc"
    mc: Optional[MCModel] = None
    abs_tol: float = 1e-2
    levelset_points: int = Field(0, ge=0, description="ψ_r points written as CSV, 0 for none")

    @model_validator(mode="after")
    def _needs_sampler(self) -> "KernelNormalizationCheck":
        if self.method != "quadrature" and self.mc is None:
            raise ValueError(f"method {self.method!r} needs an mc block with a seed")
        if self.method == "surface" and self.alpha != 2.0:
            raise ValueError("the surface method uses alpha = 2")
        return self


class MVFCheck(_CheckBase):
    kind: Literal["mvf_volume", "mvf_surface"]
    pole: Point
    r: float = Field(..., gt=0)
    solution: str
    alpha: float = Field(2.0, gt=1.0)
    mc: MCModel
    abs_tol: Optional[float] = None


class DivergenceCheck(_CheckBase):
    kind: Literal["divergence_identity"]
    pairs: int = Field(20, ge=1)
    degree: int = Field(3, ge=1)
    seed: int
    tol: float = 1e-10


class ReproductionCheck(_CheckBase):
    kind: Literal["reproduction_limit"]
    phi: str = "bump"
    xi: Point
    eps: List[float] = Field(..., min_length=2)
    order: int = Field(24, ge=4)
    tol: float = 1e-3


class ChapmanKolmogorovCheck(_CheckBase):
    kind: Literal["chapman_kolmogorov"]
    pole: Point
    point: Point
    sigma: float
    samples: int = Field(20000, ge=2)
    seed: int


class ReachConeCheck(_CheckBase):
    kind: Literal["reach_cone"]
    R: float = Field(1.0, gt=0)
    n: int = Field(10_000, ge=1)
    seed: int
    cells: int = Field(10, ge=2)
    min_coverage: float = Field(0.9, ge=0.0, le=1.0)
    steer: bool = True


class SteeringCheck(_CheckBase):
    kind: Literal["steering"]
    targets: int = Field(100, ge=1)
    seed: int
    steps: int = Field(64, ge=1)
    tol: float = 1e-6


class H4Check(_CheckBase):
    kind: Literal["h4"]
    start: Point
    target: Point
    r: float = Field(..., gt=0)
    s_ladder: List[float] = Field(..., min_length=2)
    steps: int = Field(64, ge=1)


Check = Annotated[
    Union[
        GroupAxiomsCheck, GroupFieldsCheck, NormalizationCheck, PDEResidualCheck, HomogeneityCheck,
        DecayCheck, KernelNormalizationCheck, MVFCheck, DivergenceCheck, ReproductionCheck,
        ChapmanKolmogorovCheck, ReachConeCheck, SteeringCheck, H4Check,
    ],
    Field(discriminator="kind"),
]

GROUP_KINDS = {"group_axioms", "group_fields"}


class Scenario(_Strict):
    schema_version: Literal[1] = Field(..., alias="schema")
    id: str = Field(..., min_length=1)
    description: str = ""
    operator: Optional[OperatorModel] = None
    group: Optional[str] = None
    checks: List[Check] = Field(..., min_length=1)


# ---------- Parsing ----------

def _validation_diagnostics(err: ValidationError) -> List[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e.get("loc", ())) or "<root>"
        out.append(f"{loc}: {e.get('msg')}")
    return out


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source} is not valid JSON", [f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    try:
        return Scenario.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{source} does not match scenario schema 1", _validation_diagnostics(e)) from e


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario {p}", [str(e)]) from e
    scn = parse_scenario(text, str(p))
    logger.info(f"[planner] loaded scenario {scn.id!r} with {len(scn.checks)} check(s)")
    return scn


# ---------- Plan ----------

@dataclass(frozen=True)
class PlanStep:
    check: Any                       # one of the check models
    op: Optional[OperatorSpec]
    group: Optional[GroupSpec]


@dataclass(frozen=True)
class Plan:
    scenario: Scenario
    steps: Tuple[PlanStep, ...]


def _resolve(check: Any, scn: Scenario, where: str, diags: List[str]) -> PlanStep:
    op = group = None
    if check.kind in GROUP_KINDS:
        gid = check.group or scn.group
        if gid is None:
            diags.append(f"{where}.group: a group id is required")
        else:
            try:
                group = group_from_id(gid)
            except ConfigError as e:
                diags.extend(f"{where}.group: {d}" for d in (e.diagnostics or [str(e)]))
            except MVFError as e:
                diags.append(f"{where}.group: {e}")
        return PlanStep(check, None, group)

    if check.kind in ("reach_cone",):
        opm = check.operator or scn.operator or OperatorModel(m_dims=[1, 1])
    else:
        opm = check.operator or scn.operator
    if opm is None:
        diags.append(f"{where}.operator: an operator is required")
        return PlanStep(check, None, None)
    try:
        op = opm.build()
    except MVFError as e:
        diags.append(f"{where}.operator: {e}")
        return PlanStep(check, None, None)

    try:
        if check.kind in ("mvf_volume", "mvf_surface"):
            solution_from_id(op, check.solution)
        elif check.kind == "reproduction_limit":
            bump_from_id(check.phi)
    except MVFError as e:
        field = "solution" if check.kind.startswith("mvf") else "phi"
        diags.append(f"{where}.{field}: {e.args[0] if e.args else e}")
    for name in ("pole", "point", "start", "target"):
        pt = getattr(check, name, None)
        if pt is not None and len(pt) != op.dim:
            diags.append(f"{where}.{name}: expected {op.dim} coordinates, got {len(pt)}")
    if check.kind == "reproduction_limit" and len(check.xi) != op.N:
        diags.append(f"{where}.xi: expected {op.N} coordinates, got {len(check.xi)}")
    return PlanStep(check, op, None)


def plan_from_scenario(scn: Scenario) -> Plan:
    """Resolve operators, groups and catalog ids; steps are ordered by check id."""
    diags: List[str] = []
    ids = [c.id for c in scn.checks]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        diags.append(f"checks: duplicate ids {dupes}")
    steps = [_resolve(c, scn, f"checks.{i}", diags) for i, c in enumerate(scn.checks)]
    if diags:
        raise ConfigError(f"scenario {scn.id!r} references unresolved identifiers", diags)
    steps.sort(key=lambda s: s.check.id)
    logger.info(f"[planner] plan for {scn.id!r}: {[s.check.id for s in steps]}")
    return Plan(scenario=scn, steps=tuple(steps))
