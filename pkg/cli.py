# cli.py
import argparse
import json
import os
import sys
from typing import Dict, List, Optional

from mvf import __version__
from mvf.config.settings import LOG_LEVEL, SAMPLES_SCALE, THREADS
from mvf.errors import ConfigError, MVFError
from mvf.groups.catalog import BUNDLED, group_from_id
from mvf.groups.core import check_axioms, group_to_config
from mvf.groups.fields import bracket_table, field_to_sparse, group_frame, hormander_rank, stratification_depth
from mvf.kernels.kolmo import KolmogorovSpec, OperatorSpec
from mvf.reach.control import cone_experiment
from mvf.runner.checks import RunContext
from mvf.runner.executor import execute_plan
from mvf.runner.planner import load_scenario, plan_from_scenario
from mvf.runner.report import diff_reports, load_report
from mvf.utils.export import save_report, write_rows_csv
from mvf.utils.io import ensure_dir, make_run_dir
from mvf.utils.logger import logger, set_level
from mvf.utils.rng import stream

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _config_failure(e: ConfigError) -> int:
    logger.error(str(e))
    print(str(e), file=sys.stderr)
    return EXIT_CONFIG


# ---------------- run ---------------- #

def cmd_run(args: argparse.Namespace) -> int:
    try:
        plan = plan_from_scenario(load_scenario(args.scenario))
        out_dir = ensure_dir(args.out) if args.out else make_run_dir(label=plan.scenario.id)
    except ConfigError as e:
        return _config_failure(e)

    ctx = RunContext(out_dir=out_dir, threads=args.threads, samples_scale=args.samples_scale)
    results, artifacts = execute_plan(plan, ctx)

    saved = save_report(out_dir, plan.scenario.id, [r.model_dump() for r in results], artifacts["metadata"])
    logger.info(f"EXPORTED: {saved}")

    failed = artifacts["failed"]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------- group-check ---------------- #

def cmd_group_check(args: argparse.Namespace) -> int:
    try:
        g = group_from_id(args.group_id)
    except ConfigError as e:
        return _config_failure(e)

    axioms = check_axioms(g, samples=args.samples, seed=args.seed)
    fr = group_frame(g)
    pts = stream(args.seed, 30).standard_normal((min(args.samples, 100), g.dim))
    rank = min(hormander_rank(fr, p, g.depth + 1) for p in pts)
    brackets = {f"[{a},{b}]": field_to_sparse(v) for (a, b), v in bracket_table(fr).items() if not v.is_zero()}
    out = {
        "group": group_to_config(g),
        "homogeneous_dim": g.homogeneous_dim,
        "axioms": axioms.model_dump(),
        "hormander_rank": rank,
        "stratification_depth": stratification_depth(fr),
        "brackets": brackets,
    }
    print(json.dumps(out, indent=2, default=str))
    return EXIT_OK if axioms.passed and rank == g.dim else EXIT_FAIL


# ---------------- reach-cone ---------------- #

def cmd_reach_cone(args: argparse.Namespace) -> int:
    op = OperatorSpec(KolmogorovSpec.canonical([1, 1]))
    try:
        report, sample = cone_experiment(op, args.R, args.n, args.seed, cells=args.cells,
                                         steer=not args.no_steer, workers=args.threads)
    except MVFError as e:
        logger.exception("reach-cone failed")
        print(str(e), file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        try:
            out_dir = ensure_dir(args.out)
        except ConfigError as e:
            return _config_failure(e)
        path = write_rows_csv(os.path.join(out_dir, "endpoints.csv"), sample.rows())
        logger.info(f"EXPORTED: {path}")
    print(json.dumps(report.model_dump(), indent=2))
    return EXIT_OK if report.violations == 0 else EXIT_FAIL


# ---------------- report-diff ---------------- #

def _field_tols(raw: List[str]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for item in raw:
        name, sep, val = item.partition("=")
        if not sep or not name:
            raise ConfigError(f"malformed --field-tol {item!r}", ["expected name=tolerance"])
        try:
            out[name] = float(val)
        except ValueError as e:
            raise ConfigError(f"malformed --field-tol {item!r}", [str(e)]) from e
    return out


def cmd_report_diff(args: argparse.Namespace) -> int:
    try:
        a, b = load_report(args.a), load_report(args.b)
        diffs = diff_reports(a, b, args.tol, _field_tols(args.field_tol))
    except ConfigError as e:
        return _config_failure(e)
    for d in diffs:
        print(f"{d.check}\t{d.field}\t{d.a}\t{d.b}")
    if diffs:
        logger.warning(f"{len(diffs)} field(s) differ")
        return EXIT_FAIL
    logger.info("reports agree")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvf", description="Mean value formula verification suites")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str.upper, default=LOG_LEVEL,
                        choices=["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", type=str)
    p.add_argument("--out", type=str, help="output directory (default: a timestamped run dir)")
    p.add_argument("--threads", type=int, default=THREADS)
    p.add_argument("--samples-scale", type=float, default=SAMPLES_SCALE)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("group-check", help="axioms, brackets and rank of a catalog group")
    p.add_argument("group_id", type=str,
                   help=f"e.g. heisenberg_heat(1), kolmogorov(1,1) or one of {', '.join(sorted(BUNDLED))}")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_group_check)

    p = sub.add_parser("reach-cone", help="propagation cone experiment on R^3")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cells", type=int, default=10)
    p.add_argument("--no-steer", action="store_true", help="skip the coverage grid")
    p.add_argument("--threads", type=int, default=THREADS)
    p.add_argument("--out", type=str, help="directory for endpoints.csv")
    p.set_defaults(func=cmd_reach_cone)

    p = sub.add_parser("report-diff", help="compare two report.json files")
    p.add_argument("a", type=str)
    p.add_argument("b", type=str)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--field-tol", action="append", default=[], metavar="NAME=TOL")
    p.set_defaults(func=cmd_report_diff)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_level(args.log_level)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
