# mvf/runner/report.py
"""
Field-by-field comparison of two report.json files.

Numeric fields (truth, estimate, std_error and every number nested in
details) are compared per check id with |a − b| ≤ tol·(1 + |a|); a field may
carry its own tolerance. Verdicts and the set of check ids must match.

Public API:
    Difference, load_report, diff_reports
"""

from __future__ import annotations
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

from pydantic import BaseModel

from mvf.errors import ConfigError


class Difference(BaseModel):
    check: str
    field: str
    a: Any
    b: Any
    tol: Optional[float] = None


def load_report(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read report {p}", [str(e)]) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p} is not valid JSON", [f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    if not isinstance(data, dict) or data.get("schema") != 1 or not isinstance(data.get("checks"), list):
        raise ConfigError(f"{p} is not a schema-1 report", ["expected keys: schema, scenario, checks"])
    return data


def _numbers(obj: Any, prefix: str) -> Iterator[Tuple[str, float]]:
    if isinstance(obj, bool):
        return
    if isinstance(obj, (int, float)):
        yield prefix, float(obj)
    elif isinstance(obj, str):
        try:
            v = float(obj)
        except ValueError:
            return
        if not math.isfinite(v):
            yield prefix, v
    elif isinstance(obj, dict):
        for k, v in obj.items():
            yield from _numbers(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _numbers(v, f"{prefix}[{i}]")


def _flatten(check: Dict[str, Any]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for key in ("truth", "estimate", "std_error"):
        v = check.get(key)
        if v is not None:
            out.update(_numbers(v, key))
    out.update(_numbers(check.get("details") or {}, "details"))
    return out


def _close(a: float, b: float, tol: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * (1.0 + abs(a))


def diff_reports(
    a: Mapping[str, Any], b: Mapping[str, Any], tol: float, field_tols: Optional[Mapping[str, float]] = None,
) -> List[Difference]:
    field_tols = dict(field_tols or {})
    ca = {c["id"]: c for c in a["checks"]}
    cb = {c["id"]: c for c in b["checks"]}
    diffs: List[Difference] = []
    for cid in sorted(set(ca) | set(cb)):
        if cid not in ca or cid not in cb:
            diffs.append(Difference(check=cid, field="<presence>", a=cid in ca, b=cid in cb))
            continue
        x, y = ca[cid], cb[cid]
        if bool(x.get("passed")) != bool(y.get("passed")):
            diffs.append(Difference(check=cid, field="passed", a=x.get("passed"), b=y.get("passed")))
        fx, fy = _flatten(x), _flatten(y)
        for name in sorted(set(fx) | set(fy)):
            if name not in fx or name not in fy:
                diffs.append(Difference(check=cid, field=name, a=fx.get(name), b=fy.get(name)))
                continue
            t = field_tols.get(name, field_tols.get(name.split(".")[-1], tol))
            if not _close(fx[name], fy[name], t):
                diffs.append(Difference(check=cid, field=name, a=fx[name], b=fy[name], tol=t))
    return diffs
