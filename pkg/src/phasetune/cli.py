"""Command-line driver for the cache tuning experiments."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from .cache import DESIGN_SPACE, CacheConfig, InfeasibleConfigError, is_feasible
from .dynapdm import TunerOptions, window_table_footprint_bits
from .energy import PARAMS_ENV_VAR, Evaluator, ParamsError, load_params
from .harness import (
    dump_report,
    generate_suite_files,
    load_workload,
    run_oracle,
    run_workload,
    sweep_window_size,
    write_interval_log,
    write_report_csv,
)
from .oracle import write_table_csv
from .pdm import Thresholds
from .trace import TraceFormatError, WorkloadError, parse_trace

log = logging.getLogger("phasetune")


class CliError(Exception):
    pass


def _config(text: str) -> CacheConfig:
    try:
        c = CacheConfig.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    if not is_feasible(c):
        raise argparse.ArgumentTypeError(f"infeasible cache configuration {c}")
    return c


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _evaluator(args) -> Evaluator:
    return Evaluator(load_params(args.params))


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _write(path: Optional[str], text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_space(args) -> int:
    print("index size assoc line sets")
    for k, c in enumerate(DESIGN_SPACE):
        print(f"{k:5d} {c.size_bytes:4d} {c.associativity:5d} {c.line_bytes:4d} {c.num_sets:4d}")
    return 0


def cmd_gen(args) -> int:
    manifest = generate_suite_files(args.spec, args.outdir)
    print(manifest)
    return 0


def cmd_sim(args) -> int:
    trace = parse_trace(args.trace)
    ev = _evaluator(args)
    c = ev.cost(trace, args.icfg, args.dcfg)
    out = {
        "phase_id": trace.phase_id,
        "icfg": str(args.icfg),
        "dcfg": str(args.dcfg),
        "i_miss_rate": ev.stats(trace, "instruction", args.icfg).miss_rate,
        "d_miss_rate": ev.stats(trace, "data", args.dcfg).miss_rate,
        "cycles": c.cycles,
        "time_s": c.time_s,
        "energy_J": c.energy_J,
        "avg_power_W": c.avg_power_W,
        "edp_Js": c.edp_Js,
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_oracle(args) -> int:
    suite = load_workload(args.workload)
    results = run_oracle(suite.traces, _evaluator(args), dict.fromkeys(suite.schedule), args.workers)
    fh = _open_out(args.output)
    try:
        write_table_csv(results.values(), fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _options(args) -> TunerOptions:
    return TunerOptions(
        s_d=args.sd,
        dynamic_sd=not args.sd_static,
        win_u_max=args.winumax if args.winumax is not None else math.inf,
        window_capacity=args.capacity,
        rho=args.rho,
        interval_accesses=args.interval_accesses,
    )


def cmd_tune(args) -> int:
    suite = load_workload(args.workload)
    schedule = suite.with_head(args.head) if args.head else suite.schedule
    thresholds = Thresholds(args.c_thr, args.a_thr)
    report, run = run_workload(suite.traces, schedule, _evaluator(args), args.mode, _options(args),
                               thresholds, suite.regimes, args.workers)
    _write(args.report, dump_report(report))
    if args.log:
        fh = _open_out(args.log)
        try:
            write_interval_log(run.log, fh)
        finally:
            if fh is not sys.stdout:
                fh.close()
    if args.csv:
        fh = _open_out(args.csv)
        try:
            write_report_csv(report, fh)
        finally:
            if fh is not sys.stdout:
                fh.close()
    agg = report["aggregate"]
    print(f"mode={report['mode']} phases={agg['phases']} "
          f"savings pdm={agg['pdm_savings']:.4f} dynapdm={agg['dynapdm_savings']:.4f} "
          f"oracle={agg['oracle_savings']:.4f} explored={agg['total_explored']}", file=sys.stderr)
    return 0


def cmd_sweep_sd(args) -> int:
    suite = load_workload(args.workload)
    base = TunerOptions(interval_accesses=args.interval_accesses)
    rows = sweep_window_size(suite.traces, suite.schedule, _evaluator(args), args.sd_list, base)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print("s_d windows mean_savings explored")
        for r in rows:
            print(f"{r['s_d']:g} {r['windows']} {r['mean_savings']:.6f} {r['explored']}")
    return 0


def cmd_footprint(args) -> int:
    rows = [window_table_footprint_bits(n, args.bound_bits, args.distance_bits) for n in args.entries]
    print("entries id_bits entry_bits total_bits")
    for r in rows:
        print(f"{r['entries']} {r['id_bits']} {r['entry_bits']} {r['total_bits']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasetune", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_params(sp):
        sp.add_argument("--params", default=None,
                        help=f"energy parameter JSON (default: ${PARAMS_ENV_VAR} or the shipped file)")
        return sp

    sp = sub.add_parser("space", help="list the feasible cache configurations")
    sp.set_defaults(func=cmd_space)

    sp = sub.add_parser("gen", help="write synthetic traces and a workload manifest")
    sp.add_argument("spec", help="suite spec JSON")
    sp.add_argument("-o", "--outdir", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = with_params(sub.add_parser("sim", help="price one trace on one cache pair"))
    sp.add_argument("trace")
    sp.add_argument("icfg", type=_config, help="size:assoc:line")
    sp.add_argument("dcfg", type=_config, help="size:assoc:line")
    sp.set_defaults(func=cmd_sim)

    sp = with_params(sub.add_parser("oracle", help="exhaustive EDP table as CSV"))
    sp.add_argument("workload", help="manifest, suite spec, or 'suite'/'stress'")
    sp.add_argument("-o", "--output", default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_oracle)

    sp = with_params(sub.add_parser("tune", help="run a tuner and write a comparison report"))
    sp.add_argument("workload", help="manifest, suite spec, or 'suite'/'stress'")
    sp.add_argument("--mode", choices=("pdm", "dynapdm"), default="dynapdm")
    sp.add_argument("--sd", type=float, default=0.25, help="initial window size")
    sp.add_argument("--sd-static", action="store_true", help="never merge windows")
    sp.add_argument("--winumax", type=float, default=None, help="lower bound of the last window")
    sp.add_argument("--rho", type=float, default=0.10, help="re-tune trigger (relative EDP rise)")
    sp.add_argument("--capacity", type=int, default=32, help="distance window table entries")
    sp.add_argument("--interval-accesses", type=int, default=None)
    sp.add_argument("--c-thr", type=int, default=Thresholds.c_thr)
    sp.add_argument("--a-thr", type=int, default=Thresholds.a_thr)
    sp.add_argument("--head", default=None, help="move this phase to the front of the schedule")
    sp.add_argument("--report", default=None, help="report JSON path (default stdout)")
    sp.add_argument("--log", default=None, help="interval log path (JSON lines)")
    sp.add_argument("--csv", default=None, help="per-phase CSV path")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_tune)

    sp = with_params(sub.add_parser("sweep-sd", help="window count and savings per fixed window size"))
    sp.add_argument("workload")
    sp.add_argument("--sd-list", type=_float_list, default=[0.25, 0.5, 1.0])
    sp.add_argument("--interval-accesses", type=int, default=None)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_sweep_sd)

    sp = sub.add_parser("footprint", help="distance window table storage")
    sp.add_argument("entries", type=int, nargs="+")
    sp.add_argument("--bound-bits", type=int, default=8)
    sp.add_argument("--distance-bits", type=int, default=5)
    sp.set_defaults(func=cmd_footprint)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, ParamsError, TraceFormatError, WorkloadError,
            InfeasibleConfigError, CliError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"phasetune {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
