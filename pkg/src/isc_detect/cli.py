"""Command-line pipeline: simulate -> calibrate -> detect -> evaluate.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .calibrate import Thresholds, calibrate_thresholds, exceedance
from .config import Config, load_config
from .detector import detect, healthy_deltas, read_events, write_diagnostics, write_events
from .ecm import read_trace, run_scenario, write_trace
from .evaluate import match_events, summarize, write_report
from .scenario import FaultSchedule, load_profile, load_schedule, synth_drive_cycle, table1_schedule

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are validation errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _out(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _schedule(args) -> Optional[FaultSchedule]:
    if getattr(args, "schedule", None):
        return load_schedule(args.schedule)
    if getattr(args, "table1", False):
        return table1_schedule()
    return None


def cmd_simulate(cfg: Config, args) -> int:
    schedule = _schedule(args)
    if args.profile:
        profile = load_profile(args.profile)
    else:
        profile = synth_drive_cycle(
            cfg.duration_s, cfg.sampling_dt, cfg.seed, schedule=schedule or table1_schedule()
        )
    trace = run_scenario(cfg.cell(), profile, schedule or FaultSchedule(), cfg.noise)
    default = "fault_trace" if schedule is not None else "healthy_trace"
    out = _out(Path(args.out) if args.out else cfg.path(default))
    write_trace(trace, out)
    print(f"wrote {len(trace)} samples ({trace.t[-1] + profile.dt:.0f} s) to {out}")
    print(f"  current range [{trace.i.min():.1f}, {trace.i.max():.1f}] A, "
          f"SOC {trace.soc_true[0]:.3f} -> {trace.soc_true[-1]:.3f}")
    for e in (schedule or FaultSchedule()):
        print(f"  {e.label:>4} {type(e.kind).__name__:<20} {e.t_on:>8.0f}-{e.t_off:<8.0f}")
    return EXIT_OK


def cmd_calibrate(cfg: Config, args) -> int:
    trace = read_trace(args.trace or cfg.path("healthy_trace"))
    cell = cfg.cell()
    deltas = healthy_deltas(trace.t, trace.i, trace.v, cell.r0_table, cell.capacity, cfg.soc_init)
    p = args.p if args.p is not None else cfg.p
    gamma = args.gamma if args.gamma is not None else cfg.gamma
    th = calibrate_thresholds(deltas, p, gamma)
    out = _out(Path(args.out) if args.out else cfg.path("thresholds"))
    th.save(out)
    below, above = exceedance(deltas, th)
    print(f"theta- = {th.theta_minus * 1e3:.3f} mV, theta+ = {th.theta_plus * 1e3:.3f} mV (p={p})")
    print(f"relaxed (gamma={gamma}): [{th.relaxed_minus * 1e3:.3f}, {th.relaxed_plus * 1e3:.3f}] mV")
    print(f"calibration exceedance: {below + above:.4%} of {len(deltas)} differences")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_detect(cfg: Config, args) -> int:
    th = Thresholds.load(args.thresholds or cfg.path("thresholds"))
    trace = read_trace(args.trace or cfg.path("fault_trace"))
    cell = cfg.cell()
    events, diag = detect(
        trace.t, trace.i, trace.v, th, cell.r0_table, cell.capacity, cfg.soc_init, with_diagnostics=True
    )
    out = _out(Path(args.events) if args.events else cfg.path("events"))
    write_events(events, out)
    diag_out = _out(Path(args.diagnostics) if args.diagnostics else cfg.path("diagnostics"))
    write_diagnostics(diag, diag_out)
    print(f"{len(events)} event(s)")
    for e in events:
        clear = "open" if e.t_clear is None else f"{e.t_clear:.0f}"
        print(f"  {e.label:>4} onset {e.t_onset:.0f} s, clear {clear}, dOCV {e.delta_at_onset * 1e3:.1f} mV, "
              f"I_sc {e.i_sc_est:.1f} A, R_sc {e.r_sc_est:.4f} ohm")
    print(f"wrote {out} and {diag_out}")
    return EXIT_OK


def cmd_evaluate(cfg: Config, args) -> int:
    events = read_events(args.events or cfg.path("events"))
    schedule = _schedule(args) or table1_schedule()
    tol = args.tol if args.tol is not None else cfg.tol_s
    report = match_events(events, schedule, tol)
    sys.stdout.write(summarize(report))
    out = _out(Path(args.report) if args.report else cfg.path("report"))
    write_report(report, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isc-detect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults built in)")
        return p

    p = common(sub.add_parser("simulate", help="simulate a healthy or faulted drive-cycle trace"))
    p.add_argument("--seed", type=int, help="overrides the profile and noise seeds")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--table1", action="store_true", help="inject the eleven-event benchmark schedule")
    g.add_argument("--schedule", help="JSON fault schedule")
    p.add_argument("--profile", help="t_s,i_a CSV current profile instead of the synthetic cycle")
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("calibrate", help="derive thresholds from a healthy trace"))
    p.add_argument("--trace")
    p.add_argument("--p", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", help="thresholds JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("detect", help="stream a trace through the detector"))
    p.add_argument("--trace")
    p.add_argument("--thresholds")
    p.add_argument("--events")
    p.add_argument("--diagnostics")
    p.set_defaults(func=cmd_detect)

    p = common(sub.add_parser("evaluate", help="score events against a schedule"))
    p.add_argument("--events")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--table1", action="store_true", help="score against the benchmark schedule (default)")
    g.add_argument("--schedule")
    p.add_argument("--tol", type=float, help="onset matching tolerance in seconds")
    p.add_argument("--report", help="report CSV path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = replace(cfg, seed=args.seed, noise=replace(cfg.noise, seed=args.seed))
        return args.func(cfg, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
