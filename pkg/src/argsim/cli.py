"""Command-line surface: simulate / validate / tree / compare.

Exit codes: 0 success, 1 failed validation or failed comparison,
2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .arg import (
    ArgParseError,
    local_tree,
    read_args,
    validate_arg,
    write_arg,
)
from .backintime import simulate_backintime
from .config import SimConfig
from .density import parse_density
from .rng import SALT_BACKINTIME, SALT_SPATIAL, child_seed
from .spatial import simulate_spatial
from .state import fmt_locus
from .stats import (
    CSV_HEADER,
    default_threads,
    equivalence_report,
    render_report_table,
)

_ENGINES = {
    "backintime": simulate_backintime,
    "spatial": simulate_spatial,
}

_SALTS = {
    "backintime": SALT_BACKINTIME,
    "spatial": SALT_SPATIAL,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="argsim",
        description="Coalescent-with-recombination simulator with two independent engines.",
    )
    p.add_argument("--version", action="version", version="argsim %s" % __version__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one engine and write an event-log stream")
    sim.add_argument("--engine", choices=sorted(_ENGINES), default=None)
    sim.add_argument("--samples", type=int, default=None, help="number of sampled leaves (>= 2)")
    sim.add_argument("--rho", type=float, default=None, help="recombination rate (>= 0)")
    sim.add_argument("--density", default=None, help="breakpoint density: uniform or beta:a,b")
    sim.add_argument("--seed", type=int, default=None, help="root seed (uint64)")
    sim.add_argument("--reps", type=int, default=None, help="number of replicates")
    sim.add_argument("--out", default=None, help="output event-log path")
    sim.add_argument("--from-manifest", default=None, metavar="MANIFEST",
                     help="load all settings from a previous run's manifest")

    val = sub.add_parser("validate", help="replay an event-log file and check legality")
    val.add_argument("path")

    tree = sub.add_parser("tree", help="print the local tree at a site")
    tree.add_argument("path")
    tree.add_argument("--site", type=float, required=True)
    tree.add_argument("--format", choices=("newick", "levels"), default="newick")

    cmp_ = sub.add_parser("compare", help="run both engines and test distributional agreement")
    cmp_.add_argument("--samples", type=int, required=True)
    cmp_.add_argument("--rho", type=float, default=0.0)
    cmp_.add_argument("--density", default="uniform")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--reps", type=int, required=True)
    cmp_.add_argument("--sites", default="0,0.25,0.5,0.75",
                      help="comma-separated sites in [0,1)")
    cmp_.add_argument("--alpha", type=float, default=0.001)
    cmp_.add_argument("--out", default="compare_report.csv", help="CSV report path")
    cmp_.add_argument("--threads", type=int, default=None,
                      help="worker processes (default: ARGSIM_THREADS or CPU count)")
    return p


def _simulate_settings(args, parser):
    """Merge --from-manifest with explicit flags; explicit flags win."""
    settings = {
        "engine": "backintime", "samples": None, "rho": 0.0,
        "density": "uniform", "seed": 0, "reps": 1, "out": None,
    }
    if args.from_manifest:
        try:
            with open(args.from_manifest) as fh:
                man = json.load(fh)
        except (OSError, ValueError) as exc:
            parser.error("cannot read manifest %s: %s" % (args.from_manifest, exc))
        settings.update(
            engine=man["engine"], samples=man["n_samples"], rho=man["rho"],
            density=man["density"], seed=man["seed"], reps=man["reps"],
            out=man.get("out"),
        )
    for key, argname in (("engine", "engine"), ("samples", "samples"), ("rho", "rho"),
                         ("density", "density"), ("seed", "seed"), ("reps", "reps"),
                         ("out", "out")):
        value = getattr(args, argname)
        if value is not None:
            settings[key] = value
    if settings["samples"] is None:
        parser.error("--samples is required (or use --from-manifest)")
    if settings["out"] is None:
        parser.error("--out is required (or use --from-manifest)")
    return settings


def cmd_simulate(args, parser):
    s = _simulate_settings(args, parser)
    try:
        density = parse_density(s["density"])
        base = SimConfig(n_samples=s["samples"], rho=s["rho"], density=density, seed=s["seed"])
    except ValueError as exc:
        parser.error(str(exc))
    if s["reps"] < 1:
        parser.error("--reps must be at least 1")
    salt = _SALTS[s["engine"]]
    run = _ENGINES[s["engine"]]
    args_out = []
    for r in range(s["reps"]):
        arg = run(base.with_replicate(r))
        report = validate_arg(arg)
        if not report.passed:
            sys.stderr.write("engine produced an invalid event path (replicate %d):\n" % r)
            sys.stderr.write(report.render() + "\n")
            return 1
        args_out.append(arg)
    with open(s["out"], "w") as fh:
        for arg in args_out:
            write_arg(arg, fh)
    manifest = {
        "tool": "argsim %s" % __version__,
        "format_version": 1,
        "engine": s["engine"],
        "n_samples": s["samples"],
        "rho": s["rho"],
        "density": density.spec,
        "seed": s["seed"],
        "reps": s["reps"],
        "out": s["out"],
        "child_seeds": [child_seed(s["seed"], r, salt) for r in range(s["reps"])],
    }
    with open(s["out"] + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    total_events = sum(a.event_count for a in args_out)
    print("wrote %d replicate(s), %d events -> %s" % (s["reps"], total_events, s["out"]))
    return 0


def cmd_validate(args, parser):
    try:
        with open(args.path) as fh:
            logs = read_args(fh)
    except OSError as exc:
        parser.error(str(exc))
    except ArgParseError as exc:
        sys.stderr.write("parse error: %s\n" % exc)
        return 2
    if not logs:
        sys.stderr.write("parse error: no event logs in %s\n" % args.path)
        return 2
    ok = True
    for idx, arg in enumerate(logs):
        report = validate_arg(arg)
        tag = "replicate %d (seed %d, index %d)" % (idx, arg.config.seed, arg.config.replicate_index)
        if report.passed:
            print("%s: pass (%d events)" % (tag, arg.event_count))
        else:
            ok = False
            print("%s: FAIL" % tag)
            print(report.render())
    return 0 if ok else 1


def _render_partition(blocks):
    return "|".join("{%s}" % ",".join(str(i) for i in sorted(b)) for b in blocks)


def cmd_tree(args, parser):
    if not (0.0 <= args.site < 1.0):
        parser.error("--site must lie in [0,1)")
    try:
        with open(args.path) as fh:
            logs = read_args(fh)
    except OSError as exc:
        parser.error(str(exc))
    except ArgParseError as exc:
        sys.stderr.write("parse error: %s\n" % exc)
        return 2
    if not logs:
        sys.stderr.write("parse error: no event logs in %s\n" % args.path)
        return 2
    for idx, arg in enumerate(logs):
        tree = local_tree(arg, args.site)
        if len(logs) > 1:
            print("# replicate %d" % idx)
        if args.format == "newick":
            print(tree.newick())
        else:
            print("time,partition")
            for t, blocks in tree.levels:
                print("%s,%s" % (fmt_locus(t), _render_partition(blocks)))
    return 0


def cmd_compare(args, parser):
    try:
        sites = tuple(float(tok) for tok in args.sites.split(",") if tok.strip() != "")
    except ValueError:
        parser.error("--sites must be a comma-separated list of numbers")
    if not sites:
        parser.error("--sites must name at least one site")
    for s in sites:
        if not (0.0 <= s < 1.0):
            parser.error("site %g outside [0,1)" % s)
    if not (0.0 < args.alpha <= 1.0):
        parser.error("--alpha must lie in (0,1]")
    try:
        density = parse_density(args.density)
        SimConfig(n_samples=args.samples, rho=args.rho, density=density, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    threads = args.threads if args.threads is not None else default_threads()
    reports, _ = equivalence_report(
        args.samples, args.rho, density, args.seed, args.reps,
        sites=sites, alpha=args.alpha, threads=threads,
    )
    print(render_report_table(reports))
    with open(args.out, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")
    print("report -> %s" % args.out)
    return 0 if all(r.passed for r in reports) else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args, parser)
    if args.command == "validate":
        return cmd_validate(args, parser)
    if args.command == "tree":
        return cmd_tree(args, parser)
    if args.command == "compare":
        return cmd_compare(args, parser)
    parser.error("unknown command %r" % args.command)


if __name__ == "__main__":
    sys.exit(main())
