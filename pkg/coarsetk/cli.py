"""
Command-line front end.

    python -m coarsetk space gen --lattice 1 --box 0:127 --norm l1 --out z128.json
    python -m coarsetk precode build-example dyadic --size 128 --out dyadic.json
    python -m coarsetk verify --suite all --seed 7

Reports go to stdout (or ``--report``); logs go to stderr. Exit codes: 0 on
success, 2 on a failed validation or bad input, 3 when a budget ran out.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from coarsetk import __version__
from coarsetk.builders import PROVIDER_KINDS, ControlCoverProvider, build_precode_AN, build_precode_asdim
from coarsetk.coarse_maps import (
    check_B_linear,
    check_Bn,
    check_Cn,
    check_coarse_equivalence,
    coarse_density,
    fit_moduli,
    properness_table,
)
from coarsetk.config import Settings, load_settings
from coarsetk.covers import cover_report
from coarsetk.dimension import GENERATORS, cover_for_scales, witness_over_schedule
from coarsetk.errors import BudgetExceeded, CoarseTKError, ValidationError
from coarsetk.metric_core import FiniteMetricSpace, SpaceRegistry, _json_number, scale_schedule, validate_metric
from coarsetk.precode import (
    build_ultrametric,
    distance_matrix_json,
    example_clusters,
    example_dyadic,
    example_triadic,
    quotient_map,
    strong_triangle_violation,
    to_newick,
    validate_precode,
)
from coarsetk.reports import RunReport, stopwatch, write_csv
from coarsetk.storage import (
    cover_document,
    load_cover,
    load_map,
    load_precode,
    load_space,
    map_document,
    precode_document,
    read_json,
    space_document,
    write_json,
)
from coarsetk.verify_suite import PROFILES, SUITES, run_suite

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
VALUE_FLAGS = ("--box", "--x0")


def normalize_argv(argv: Sequence[str]) -> List[str]:
    """Attach negative values to their flag so argparse does not read them as options."""
    result: List[str] = []
    args = list(argv)
    i = 0
    while i < len(args):
        token = args[i]
        if token in VALUE_FLAGS and i + 1 < len(args) and args[i + 1].startswith("-") and args[i + 1][1:2].isdigit():
            result.append(f"{token}={args[i + 1]}")
            i += 2
            continue
        result.append(token)
        i += 1
    return result


def _parse_box(raw: str):
    try:
        lo, hi = raw.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"box must look like LO:HI, got {raw!r}")


def _parse_scales(raw: Optional[str]) -> Optional[List[Any]]:
    if not raw:
        return None
    scales = []
    for part in raw.split(","):
        value = Fraction(part.strip())
        scales.append(int(value) if value.denominator == 1 else value)
    return scales


def _number(raw: str):
    value = Fraction(raw)
    return int(value) if value.denominator == 1 else value


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_space(args, settings: Settings) -> RunReport:
    report = RunReport(command=f"space {args.action}", seed=settings.seed)
    if args.action == "gen":
        boxes = args.box or [(0, 9)]
        if len(boxes) == 1:
            boxes = boxes * args.lattice
        if len(boxes) != args.lattice:
            raise ValidationError(f"{len(boxes)} boxes given for a lattice of dimension {args.lattice}")
        space_id = args.id or f"Z{args.lattice}_{args.norm}"
        space = FiniteMetricSpace.lattice(space_id, boxes, args.norm)
        if args.out:
            write_json(space_document(space), args.out)
        report.results = {"space": space.id, "points": space.size, "diameter": space.diameter_all(),
                          "document": None if args.out else space_document(space)}
    elif args.action == "import":
        data = read_json(args.file)
        matrix = data["matrix"] if isinstance(data, dict) else data
        space = FiniteMetricSpace.from_matrix(args.id or Path(args.file).stem, np.asarray(matrix, dtype=np.int64),
                                              labels=data.get("labels") if isinstance(data, dict) else None)
        if args.out:
            write_json(space_document(space), args.out)
        report.results = {"space": space.id, "points": space.size, "diameter": space.diameter_all()}
    elif args.action == "validate":
        data = read_json(args.file)
        space = load_space(_as_space_document(data, args.file), validate=False)
        violation = validate_metric(space, seed=settings.seed)
        report.add("metric axioms", f"validate {space.id}", violation is None, {"points": space.size},
                   violation.to_dict() if violation else None)
    else:
        space = load_space(read_json(args.file))
        report.results = {"space": space.id, "points": space.size, "kind": space.geometry.kind,
                          "diameter": space.diameter_all(), "scale_cap": space.scale_cap,
                          "realized_distances": len(space.realized_distances())}
    return report


def _as_space_document(data: Any, path: str) -> Dict[str, Any]:
    if isinstance(data, list):
        data = {"matrix": data}
    if "geometry" in data or "space" in data:
        return data
    return {"id": Path(path).stem, "geometry": {"kind": "matrix", "matrix": data["matrix"]},
            "labels": data.get("labels")}


def cmd_cover(args, settings: Settings) -> RunReport:
    C = load_cover(read_json(args.file))
    report = RunReport(command="cover report", seed=settings.seed)
    report.results = cover_report(C, _parse_scales(args.scales), settings.clique_budget)
    return report


def cmd_dim(args, settings: Settings) -> RunReport:
    space = load_space(read_json(args.space))
    generator = GENERATORS[args.generator] if args.generator else None
    report = RunReport(command=f"dim {args.action}", seed=settings.seed)
    if args.action == "witness":
        scales = _parse_scales(args.scales)
        if scales is None and args.r_max is not None:
            scales = scale_schedule(_number(args.r_max))
        witness = witness_over_schedule(space, args.n, generator, scales)
        report.results = witness.to_json()
    else:
        cover = cover_for_scales(space, _number(args.s), _number(args.t), generator, budget=settings.clique_budget)
        if args.out:
            write_json(cover_document(cover), args.out)
        report.results = {"elements": len(cover), "certificates": cover.certificates}
    return report


def cmd_map(args, settings: Settings) -> RunReport:
    registry = SpaceRegistry()
    f = load_map(read_json(args.map), registry)
    budgets = {"clique_budget": settings.clique_budget, "coloring_budget": settings.coloring_budget}
    report = RunReport(command=f"map {args.action}", seed=settings.seed)
    scales = _parse_scales(args.scales)
    if getattr(args, "r", None):
        scales = [_number(r) for r in args.r]
    if args.action == "fit":
        fit_moduli(f)
        report.results = {"map": map_document(f, include_moduli=True), "coarse_density": coarse_density(f),
                          "properness": {str(r): v for r, v in properness_table(f, scales).items()}}
    elif args.action == "check-bn":
        for r in scales or scale_schedule(f.codomain.scale_cap):
            result = check_Bn(f, args.n, r, threads=settings.threads, **budgets)
            if result.exact:
                report.add("condition (B)_n", f"{f.name} at r={r}", True, {"d": result.d, "n": args.n})
            else:
                report.add_budget("condition (B)_n", f"{f.name} at r={r}", result.d_lower, result.d_upper)
            report.results[str(r)] = result.to_json()
    elif args.action == "check-cn":
        certificate = check_Cn(f, args.n, scales, _number(args.c_max) if args.c_max else None, **budgets)
        report.add("condition (C)_n", f.name, certificate is not None,
                   certificate.to_json() if certificate else {"c_max": args.c_max})
    elif args.action == "check-b":
        report.results = check_B_linear(f, scales)
    else:
        g = load_map(read_json(args.inverse), registry)
        result = check_coarse_equivalence(f, g)
        report.add("coarse equivalence", f"{f.name} and {g.name}", not result["flags"],
                   {"S_X": result["S_X"], "S_Y": result["S_Y"]})
        report.results = result
    return report


def cmd_precode(args, settings: Settings) -> RunReport:
    report = RunReport(command=f"precode {args.action}", seed=settings.seed)
    if args.action == "build-example":
        if args.example == "dyadic":
            P = example_dyadic(args.size)
        elif args.example == "triadic":
            P = example_triadic(args.size, kind=args.kind)
        else:
            P = example_clusters()
        if args.n:
            validate_precode(P, args.n).raise_for_failures()
        if args.out:
            write_json(precode_document(P), args.out)
        report.results = {"structure": P.name, "levels": [len(level) for level in P.levels],
                          "validation": P.report.to_json() if P.report else None}
        return report

    P = load_precode(read_json(args.file))
    if args.action == "validate":
        result = validate_precode(P, args.n, _parse_scales(args.scales), settings.clique_budget)
        report.add("precode structure", f"{P.name} as {args.n}-precode", result.valid, {"levels": len(P.levels)},
                   {"failures": result.failures} if result.failures else None)
        report.results = result.to_json()
        if args.out and result.valid:
            write_json(precode_document(P), args.out)
    elif args.action == "ultrametric":
        U = build_ultrametric(P)
        violation = strong_triangle_violation(U, seed=settings.seed)
        report.add("ultrametric", f"strong triangle on {U.size} leaves", violation is None, {"base": U.base},
                   {"triple": list(violation)} if violation else None)
        report.results = {"diverged": U.diverged, "distances": distance_matrix_json(U)}
    else:
        q = quotient_map(P, selector=args.selector, seed=settings.seed)
        if args.out:
            write_json(map_document(q), args.out)
        report.results = {"map": q.name, "table": q.table, "certificates": q.certificates}
    return report


def cmd_build(args, settings: Settings) -> RunReport:
    space = load_space(read_json(args.space))
    provider = ControlCoverProvider(space, args.n, args.provider,
                                    generator=GENERATORS[args.generator] if args.generator else None,
                                    budget=settings.clique_budget)
    x0 = _base_point(space, args.x0)
    builder = build_precode_asdim if args.kind == "asdim" else build_precode_AN
    P, trace = builder(space, args.n, provider, x0, args.levels)
    if args.out:
        write_json(precode_document(P), args.out)
        write_json(trace.to_json(), Path(args.out).with_suffix(".trace.json"))
    report = RunReport(command=f"build {args.kind}", seed=settings.seed)
    report.add("precode builder", f"{P.name} as {args.n + 1}-precode", trace.passed and P.validated_n == args.n + 1,
               {"levels": len(P.levels)})
    report.results = trace.to_json()
    return report


def _base_point(space: FiniteMetricSpace, raw: Optional[str]) -> int:
    """Label first, then a plain point index."""
    if raw is None:
        return 0
    if raw in space.labels:
        return space.index_of(raw)
    try:
        return space.check_index(int(raw))
    except ValueError:
        raise ValidationError(f"--x0 {raw!r} is neither a label nor an index of {space.id}")


def cmd_verify(args, settings: Settings) -> RunReport:
    report = run_suite(args.suite, args.profile, settings.seed, settings, timings=args.timings)
    if args.csv:
        write_csv(report, args.csv)
    return report


def cmd_export(args, settings: Settings) -> RunReport:
    P = load_precode(read_json(args.file))
    U = build_ultrametric(P)
    report = RunReport(command=f"export {args.format}", seed=settings.seed)
    if args.format == "newick":
        text = to_newick(U)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        report.results = {"newick": text}
    else:
        document = distance_matrix_json(U)
        if args.out:
            write_json(document, args.out)
        report.results = document
    return report


COMMANDS = {
    "space": cmd_space,
    "cover": cmd_cover,
    "dim": cmd_dim,
    "map": cmd_map,
    "precode": cmd_precode,
    "build": cmd_build,
    "verify": cmd_verify,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coarsetk", description="Exact large-scale geometry checks on finite metric spaces")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, help="parallel workers (overrides COARSETK_THREADS)")
    parser.add_argument("--seed", type=int, help="random seed (overrides COARSETK_SEED)")
    parser.add_argument("--log-level", help="logging level (overrides COARSETK_LOG_LEVEL)")
    parser.add_argument("--report", help="write the run report here instead of stdout")
    parser.add_argument("--timings", action="store_true", help="include per-check timings in reports")
    sub = parser.add_subparsers(dest="command", required=True)

    space = sub.add_parser("space", help="generate, import and validate spaces")
    space_sub = space.add_subparsers(dest="action", required=True)
    gen = space_sub.add_parser("gen", help="integer lattice box")
    gen.add_argument("--lattice", type=int, default=1, help="dimension")
    gen.add_argument("--box", type=_parse_box, action="append", help="LO:HI per axis (one box is reused)")
    gen.add_argument("--norm", choices=("l1", "linf", "l2"), default="l1")
    gen.add_argument("--id")
    gen.add_argument("--out")
    imp = space_sub.add_parser("import", help="explicit distance matrix")
    imp.add_argument("file")
    imp.add_argument("--id")
    imp.add_argument("--out")
    for action in ("validate", "info"):
        p = space_sub.add_parser(action)
        p.add_argument("file")

    cover = sub.add_parser("cover", help="cover invariants")
    cover_sub = cover.add_subparsers(dest="action", required=True)
    rep = cover_sub.add_parser("report")
    rep.add_argument("file")
    rep.add_argument("--scales", help="comma separated scales")

    dim = sub.add_parser("dim", help="dimension witnesses")
    dim_sub = dim.add_subparsers(dest="action", required=True)
    wit = dim_sub.add_parser("witness")
    wit.add_argument("--space", required=True)
    wit.add_argument("--n", type=int)
    wit.add_argument("--generator", choices=sorted(GENERATORS))
    wit.add_argument("--scales")
    wit.add_argument("--r-max", help="largest scale of the geometric schedule")
    exp = dim_sub.add_parser("expand")
    exp.add_argument("--space", required=True)
    exp.add_argument("--s", required=True)
    exp.add_argument("--t", required=True)
    exp.add_argument("--generator", choices=sorted(GENERATORS))
    exp.add_argument("--out")

    maps = sub.add_parser("map", help="coarse map checks")
    map_sub = maps.add_subparsers(dest="action", required=True)
    for action in ("fit", "check-bn", "check-cn", "check-b", "equivalence"):
        p = map_sub.add_parser(action)
        p.add_argument("--map", required=True)
        p.add_argument("--scales")
        if action in ("check-bn", "check-b"):
            p.add_argument("--r", action="append", help="single scale (repeatable)")
        if action in ("check-bn", "check-cn"):
            p.add_argument("--n", type=int, required=True)
        if action == "check-cn":
            p.add_argument("--c-max")
        if action == "equivalence":
            p.add_argument("--inverse", required=True)

    precode = sub.add_parser("precode", help="precode structures")
    pre_sub = precode.add_subparsers(dest="action", required=True)
    ex = pre_sub.add_parser("build-example")
    ex.add_argument("example", choices=("dyadic", "triadic", "clusters"))
    ex.add_argument("--size", type=int, default=8, help="N for dyadic, K for triadic")
    ex.add_argument("--kind", choices=("asdim", "AN"), default="asdim")
    ex.add_argument("--n", type=int, help="validate as an n-precode before writing")
    ex.add_argument("--out")
    val = pre_sub.add_parser("validate")
    val.add_argument("file")
    val.add_argument("--n", type=int, required=True)
    val.add_argument("--scales")
    val.add_argument("--out")
    ult = pre_sub.add_parser("ultrametric")
    ult.add_argument("file")
    quo = pre_sub.add_parser("quotient")
    quo.add_argument("file")
    quo.add_argument("--selector", choices=("min", "random"), default="min")
    quo.add_argument("--out")

    build = sub.add_parser("build", help="inductive precode builders")
    build.add_argument("kind", choices=("asdim", "an"))
    build.add_argument("--space", required=True)
    build.add_argument("--n", type=int, required=True)
    build.add_argument("--provider", choices=PROVIDER_KINDS[:2], default="grid-brick")
    build.add_argument("--generator", choices=sorted(GENERATORS))
    build.add_argument("--x0", help="label or index of the base point")
    build.add_argument("--levels", type=int, help="level cap")
    build.add_argument("--out")

    verify = sub.add_parser("verify", help="batch verification suites")
    verify.add_argument("--suite", required=True, choices=SUITES + ("all",))
    verify.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    verify.add_argument("--csv", help="write the verdict table as CSV")
    verify.add_argument("--timings", action="store_true", default=argparse.SUPPRESS)

    export = sub.add_parser("export", help="export the ultrametric of a validated precode")
    export.add_argument("file")
    export.add_argument("--format", choices=("newick", "json"), default="newick")
    export.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(normalize_argv(sys.argv[1:] if argv is None else argv))
    try:
        settings = load_settings()
    except ValueError as e:
        parser.error(str(e))
    settings = settings.with_overrides(threads=args.threads, seed=args.seed,
                                       log_level=args.log_level.upper() if args.log_level else None)
    logging.basicConfig(level=settings.log_level, format=LOG_FORMAT, stream=sys.stderr)

    try:
        with stopwatch() as elapsed:
            report = COMMANDS[args.command](args, settings)
            seconds = elapsed()
    except BudgetExceeded as e:
        logger.error(f"Budget exhausted: {e}")
        report = RunReport(command=args.command, seed=settings.seed)
        report.add_budget(args.command, str(e), _json_number(e.lower), _json_number(e.upper))
        _emit(report, args)
        return e.exit_code
    except CoarseTKError as e:
        logger.error(f"{args.command} failed: {e}")
        report = RunReport(command=args.command, seed=settings.seed)
        report.add(args.command, str(e), False, counterexample=e.details or None)
        _emit(report, args)
        return e.exit_code

    report.timings = report.timings or args.timings
    if args.timings:
        report.results = {**report.results, "seconds": round(seconds, 3)}
    _emit(report, args)
    return report.exit_code


def _emit(report: RunReport, args):
    text = report.dumps()
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
