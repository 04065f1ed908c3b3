# mvf/utils/io.py
import re
from datetime import datetime
from pathlib import Path
from typing import List

from mvf.config.settings import RUNS_DIR
from mvf.errors import ConfigError

_UNSAFE = re.compile(r"[^A-Za-z0-9_.-]+")


def _run_name(label: str | None) -> str:
    ts = datetime.now().strftime("%Y%m%d-%H%M%S")
    tag = _UNSAFE.sub("_", label).strip("._") if label else ""
    return f"{ts}-{tag}" if tag else ts


def make_run_dir(base: str | None = None, label: str | None = None) -> str:
    """
    Fresh directory <YYYYmmdd-HHMMSS>[-label][-k] under the first usable of:
    `base`, $MVF_RUNS_DIR, /tmp/runs, ./runs. An existing run directory is
    never reused; a numeric suffix is added instead.
    """
    name = _run_name(label)
    roots = [r for r in (base, RUNS_DIR) if r] + ["/tmp/runs", "./runs"]
    problems: List[str] = []
    for root in roots:
        try:
            parent = Path(root).resolve()
            parent.mkdir(parents=True, exist_ok=True)
            for k in range(1000):
                run_dir = parent / (name if k == 0 else f"{name}-{k}")
                try:
                    run_dir.mkdir()
                except FileExistsError:
                    continue
                return str(run_dir)
            problems.append(f"{parent}: too many runs named {name}")
        except OSError as e:
            problems.append(f"{root}: {e}")
    raise ConfigError("could not create a run directory", problems)


def ensure_dir(path: str) -> str:
    """Create `path` (and parents) if missing and return it resolved."""
    p = Path(path).resolve()
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot use output directory {path}", [str(e)]) from e
    return str(p)
