# mvf/utils/export.py
"""
Report and point-cloud writers.

Outputs:
- report.json : full results with run metadata (timestamps live only here).
- summary.csv : one row per check, ordered by id, floats as %.17g, so two
                runs with the same seeds give byte-identical files.
- <name>.csv  : point clouds and decay tables, header row plus %.17g values.

Public API:
    fmt_float(x) -> str
    write_rows_csv(path, rows, columns=None) -> str
    save_report(out_dir, scenario_id, results, metadata) -> dict[str, str]
"""

from __future__ import annotations
import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

SUMMARY_COLUMNS = ["id", "kind", "truth", "estimate", "std_error", "pass"]


def fmt_float(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    try:
        v = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _json_safe(obj: Any) -> Any:
    """Non-finite floats become strings; numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _json_safe(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_rows_csv(path: str, rows: Iterable[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    rows = list(rows)
    cols = list(columns) if columns else (list(rows[0].keys()) if rows else [])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([fmt_float(row.get(c)) for c in cols])
    return path


def _summary_row(result: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "id": result["id"],
        "kind": result["kind"],
        "truth": result.get("truth"),
        "estimate": result.get("estimate"),
        "std_error": result.get("std_error"),
        "pass": "pass" if result.get("passed") else "fail",
    }


def save_report(
    out_dir: str, scenario_id: str, results: List[Dict[str, Any]], metadata: Dict[str, Any],
) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(results, key=lambda r: r["id"])

    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(_json_safe({"schema": 1, "scenario": scenario_id, "metadata": metadata, "checks": ordered}),
                  f, ensure_ascii=False, indent=2)

    csv_path = write_rows_csv(os.path.join(out_dir, "summary.csv"), [_summary_row(r) for r in ordered], SUMMARY_COLUMNS)
    return {"json": json_path, "csv": csv_path}
