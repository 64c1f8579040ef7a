"""Command line interface.

Subcommands: run (a scenario from a config file), verify (the acceptance
suite), plotdata (plot-spec files for a run directory), inspect (print a
manifest summary).  Exit codes: 0 pass, 1 criterion failure, 2 config
error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from .errors import ConfigError, NumericalAbort, TwistlabError
from .errors import NoSeriesFound


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="twistlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)

    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    p_ver.add_argument("--suite", choices=("quick", "full"), default="quick")
    p_ver.add_argument("--out", default="verify_out")
    p_ver.add_argument("--only", default=None,
                       help="comma-separated criterion ids (e.g. c1,c9)")

    p_plot = sub.add_parser("plotdata", help="emit plot-spec files")
    p_plot.add_argument("rundir")

    p_ins = sub.add_parser("inspect", help="summarize a run manifest")
    p_ins.add_argument("manifest")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "plotdata":
            return _cmd_plotdata(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except NoSeriesFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_run(args) -> int:
    from .scenarios import load_config, run_scenario

    cfg = load_config(args.config)
    man = run_scenario(cfg, args.out)
    print(json.dumps(man["diagnostics"], indent=1, sort_keys=True))
    if man.get("incomplete"):
        abort = man["diagnostics"].get("abort", "")
        if abort:
            print(f"numerical abort: {abort}", file=sys.stderr)
            return 3
        return 1
    return 0


def _cmd_verify(args) -> int:
    from .acceptance import run_suite

    only = args.only.split(",") if args.only else None
    results = run_suite(args.suite, args.out, only=only)
    failed = 0
    for r in results:
        print(r.line())
        if not r.passed and not r.void:
            failed += 1
    print(f"suite={args.suite}: {sum(r.passed for r in results)}/"
          f"{len(results)} passed"
          + (f", {sum(r.void for r in results)} void" if any(r.void for r in results) else ""))
    return 1 if failed else 0


PLOT_LABELS = {
    "twist_defect": ("time", "L2 twist defect"),
    "winding_remainder": ("time", "winding remainder R_F"),
    "arnold_q": ("time", "streamline migration norm"),
    "perimeter": ("time", "patch perimeter"),
    "winding_gap": ("time", "winding gap"),
    "sym_diff": ("time", "symmetric difference to unit disc"),
    "grad_l1": ("time", "|grad omega|_L1"),
    "wandering_gap": ("time", "sup-norm gap"),
    "lifted_diameter": ("time", "lifted diameter"),
    "flow_gradient_l1": ("time", "|grad Phi|_L1"),
}


def _cmd_plotdata(args) -> int:
    rundir = args.rundir
    csvs = sorted(glob.glob(os.path.join(rundir, "*.csv")))
    if not csvs:
        raise NoSeriesFound(f"no diagnostic series in {rundir}")
    for path in csvs:
        name = os.path.splitext(os.path.basename(path))[0]
        xlabel, ylabel = PLOT_LABELS.get(name, ("time", name))
        has_bound = False
        with open(path) as fh:
            header = fh.readline()
            first = fh.readline().strip().split(",")
            has_bound = len(first) > 2 and first[2] != ""
        spec_path = os.path.join(rundir, f"{name}.plot")
        with open(spec_path, "w") as fh:
            fh.write(f"title = {name}\n")
            fh.write(f"xlabel = {xlabel}\n")
            fh.write(f"ylabel = {ylabel}\n")
            fh.write(f"series = {os.path.basename(path)}:t:value\n")
            if has_bound:
                fh.write(f"bound = {os.path.basename(path)}:t:bound\n")
        print(spec_path)
    return 0


def _cmd_inspect(args) -> int:
    with open(args.manifest) as fh:
        man = json.load(fh)
    cfg = man.get("config", {})
    print(f"scenario: {cfg.get('scenario')}")
    print(f"version:  {man.get('code_version')} "
          f"(kernel backend: {man.get('kernel_backend')})")
    print(f"incomplete: {man.get('incomplete')}")
    timing = man.get("timing", {})
    print(f"steps: {timing.get('steps')}  wall: {timing.get('wall_clock_s', 0):.1f}s")
    print("config:")
    for k in sorted(cfg):
        print(f"  {k} = {cfg[k]}")
    print("diagnostics:")
    for k in sorted(man.get("diagnostics", {})):
        print(f"  {k} = {man['diagnostics'][k]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
