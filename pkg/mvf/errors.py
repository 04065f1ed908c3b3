# mvf/errors.py
"""
Exception hierarchy shared by every module.

Each error carries the data a caller needs to report the failure (offending
lengths, the point that produced a non-finite value, the horizon that was
exceeded, ...) in addition to a readable message.
"""

from __future__ import annotations
from typing import Any, List, Sequence


class MVFError(Exception):
    """Base class for all library errors."""


class DimensionError(MVFError, ValueError):
    def __init__(self, what: str, expected: int, got: int) -> None:
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected length {expected}, got {got}")


class DomainError(MVFError, ValueError):
    def __init__(self, name: str, value: Any, reason: str = "") -> None:
        self.name = name
        self.value = value
        msg = f"{name}={value!r} outside its domain"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NonFiniteError(MVFError, ValueError):
    def __init__(self, what: str, point: Sequence[float] | None = None) -> None:
        self.point = None if point is None else [float(v) for v in point]
        where = f" at {self.point}" if self.point is not None else ""
        super().__init__(f"non-finite {what}{where}")


class ConvergenceError(MVFError, RuntimeError):
    def __init__(self, what: str, iterations: int, residual: float) -> None:
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{what} did not converge after {iterations} iterations (residual {residual:.3e})")


class HorizonError(MVFError, RuntimeError):
    def __init__(self, horizon: float, r: float) -> None:
        self.horizon = horizon
        self.r = r
        super().__init__(f"time extent for r={r} exceeds the configured horizon {horizon}")


class StencilDomainError(MVFError, ValueError):
    def __init__(self, point: Sequence[float]) -> None:
        self.point = [float(v) for v in point]
        super().__init__(f"finite-difference stencil leaves the declared domain at {self.point}")


class CurveExitError(MVFError, RuntimeError):
    def __init__(self, exit_time: float, point: Sequence[float]) -> None:
        self.exit_time = float(exit_time)
        self.point = [float(v) for v in point]
        super().__init__(f"admissible curve leaves the domain at s={self.exit_time:.6g} (last inside point {self.point})")


class SteeringError(MVFError, RuntimeError):
    pass


class ConfigError(MVFError, ValueError):
    def __init__(self, message: str, diagnostics: List[str] | None = None) -> None:
        self.diagnostics = list(diagnostics or [])
        detail = "".join(f"\n  - {d}" for d in self.diagnostics)
        super().__init__(f"{message}{detail}")
