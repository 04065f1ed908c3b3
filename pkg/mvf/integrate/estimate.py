# mvf/integrate/estimate.py
from __future__ import annotations
from typing import Any, Dict, Optional, Sequence

import math
from pydantic import BaseModel, ConfigDict, Field

from mvf.config.settings import GUARD_REL


class MCConfig(BaseModel):
    """Sampling plan for one Monte-Carlo estimate. The seed has no default."""

    model_config = ConfigDict(frozen=True)

    samples: int = Field(100_000, ge=1, description="total draws over all batches")
    seed: int = Field(..., description="root seed; streams are keyed by (term, stratum, batch)")
    stratify_slices: int = Field(16, ge=1, description="number of equal-mass time strata")
    antithetic: bool = Field(False, description="pair each draw with its mirror in the slice ellipsoid")
    batches: int = Field(32, ge=2, description="independent batches; std_error comes from their spread")
    workers: int = Field(1, ge=1, description="thread pool size for batches")
    guard_rel: float = Field(GUARD_REL, ge=0.0, lt=1.0, description="excluded time strip next to the pole, relative to Δ")
    grid_points: int = Field(2048, ge=64, description="cells of the tabulated time proposal")

    def scaled(self, factor: float) -> "MCConfig":
        return self.model_copy(update={"samples": max(self.batches, int(round(self.samples * factor)))})

    def reseeded(self, seed: int) -> "MCConfig":
        return self.model_copy(update={"seed": int(seed)})


class Estimate(BaseModel):
    value: float
    std_error: float = Field(..., ge=0.0)
    n_effective: int = Field(..., ge=0)
    seed: int
    guard_bound: float = Field(0.0, ge=0.0, description="bound on the excluded pole strip, already inside std_error")
    flagged: bool = False
    note: Optional[str] = None

    def to_row(self) -> Dict[str, Any]:
        return {"value": self.value, "std_error": self.std_error, "n": self.n_effective, "seed": self.seed}

    def within(self, truth: float, abs_tol: float = 0.0) -> bool:
        return abs(self.value - truth) <= max(abs_tol, 3.0 * self.std_error)

    def scaled(self, factor: float) -> "Estimate":
        return self.model_copy(update={
            "value": self.value * factor,
            "std_error": self.std_error * abs(factor),
            "guard_bound": self.guard_bound * abs(factor),
        })


def combine(parts: Sequence[Estimate], seed: int | None = None, note: str | None = None) -> Estimate:
    """Sum of independent estimates (errors added in quadrature)."""
    if not parts:
        return Estimate(value=0.0, std_error=0.0, n_effective=0, seed=seed or 0, note=note)
    return Estimate(
        value=math.fsum(p.value for p in parts),
        std_error=math.sqrt(math.fsum(p.std_error ** 2 for p in parts)),
        n_effective=sum(p.n_effective for p in parts),
        seed=parts[0].seed if seed is None else seed,
        guard_bound=math.fsum(p.guard_bound for p in parts),
        flagged=any(p.flagged for p in parts),
        note=note,
    )
