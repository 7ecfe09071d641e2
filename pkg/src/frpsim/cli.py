"""Command line front end.

Profiles move between commands as small CSVs: hourly files have a header
``bus,h0,h1,...`` with one row per bus, sub-period files use ``bus,k0,k1,...``.
Solutions and market outcomes are JSON written by the corresponding modules.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dayahead, harness, realtime, requirements, scenarios, settlement
from . import stochastic_uc as suc
from .system import SystemFileError, ValidationError, load_system
from .timegrid import TimeGrid


def _read_profile_csv(path):
    """(bus ids, value matrix) from a bus,h0..hN / bus,k0..kN CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "bus":
        raise SystemExit(f"{path}: expected header starting with 'bus'")
    buses = []
    values = []
    for row in rows[1:]:
        if not row:
            continue
        buses.append(row[0])
        values.append([float(v) for v in row[1:]])
    return buses, np.asarray(values)


def _hourly_profile(path, periods_per_hour):
    buses, hourly = _read_profile_csv(path)
    grid = TimeGrid(hours=hourly.shape[1], periods_per_hour=periods_per_hour)
    return scenarios.NetLoadProfile.from_hourly(buses, hourly, grid)


def _subperiod_profile(path, periods_per_hour):
    buses, values = _read_profile_csv(path)
    if values.shape[1] % periods_per_hour:
        raise SystemExit(
            f"{path}: {values.shape[1]} columns is not a whole number of hours "
            f"at {periods_per_hour} periods per hour"
        )
    grid = TimeGrid(
        hours=values.shape[1] // periods_per_hour, periods_per_hour=periods_per_hour
    )
    return scenarios.NetLoadProfile(buses, grid, values)


def _cmd_validate(args):
    try:
        load_system(args.system)
    except ValidationError as exc:
        print("invalid system:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  - {issue}", file=sys.stderr)
        return 1
    except SystemFileError as exc:
        print(f"malformed system file: {exc}", file=sys.stderr)
        return 1
    print(f"{args.system}: ok")
    return 0


def _cmd_gen_scenarios(args):
    system = load_system(args.system)
    forecast = _hourly_profile(args.forecast, args.periods_per_hour)
    if list(forecast.buses) != system.bus_ids:
        raise SystemExit("forecast buses do not match system buses")
    scn = scenarios.gen_ar1_scenarios(
        forecast, args.sigma, args.rho, args.n, args.seed
    )
    scenarios.save_scenarios(scn, args.out)
    print(f"wrote {args.n} scenarios to {args.out}")
    return 0


def _cmd_suc_solve(args):
    system = load_system(args.system)
    scn = scenarios.load_scenarios(args.scenarios)
    sol = suc.solve_suc(
        system, scn, gap_tol=args.gap_tol, time_limit=args.time_limit,
        dump_lp=args.dump_lp,
    )
    suc.save_suc_solution(sol, args.out)
    print(
        f"objective {sol.objective:.2f} USD "
        f"(commitment {sol.commitment_cost:.2f}, "
        f"expected dispatch {sol.expected_dispatch_cost:.2f}); "
        f"{sol.wall_time_s:.2f}s, peak rss {sol.peak_rss_mb:.0f} MB"
    )
    return 0


def _cmd_frp_req(args):
    if args.method == "suc":
        if not args.solution or not args.scenarios:
            raise SystemExit("--method suc requires --solution and --scenarios")
        sol = suc.load_suc_solution(args.solution)
        scn = scenarios.load_scenarios(args.scenarios)
        req = requirements.suc_requirements(sol, scn)
    else:
        if not args.forecast:
            raise SystemExit(f"--method {args.method} requires --forecast")
        forecast = _hourly_profile(args.forecast, args.periods_per_hour)
        coverage = {"p90": 0.90, "p95": 0.95, "p99": 0.99}[args.method]
        req = requirements.percentile_requirements(forecast, args.sigma, coverage)
    requirements.save_requirements(req, args.out)
    print(f"wrote {req.source} requirements for {req.hours} hours to {args.out}")
    return 0


def _cmd_dam_clear(args):
    system = load_system(args.system)
    buses, hourly = _read_profile_csv(args.bids)
    if buses != system.bus_ids:
        raise SystemExit("bid buses do not match system buses")
    bids = dayahead.DamBidSet(buses, hourly)
    req = requirements.load_requirements(args.req)
    fix = None
    if args.fix_commitments:
        fix = suc.load_suc_solution(args.fix_commitments).committed_hours()
    out = dayahead.clear_dam(
        system, bids, req, fix_commitments=fix, gap_tol=args.gap_tol,
        time_limit=args.time_limit, dump_lp=args.dump_lp,
    )
    dayahead.save_dam_outcome(out, args.out)
    short = out.sf_up.sum() + out.sf_dn.sum()
    print(
        f"cleared at {out.objective:.2f} USD, requirement shortfall {short:.3f} MW, "
        f"wrote {args.out}"
    )
    return 0


def _cmd_rtm_sim(args):
    system = load_system(args.system)
    dam = dayahead.load_dam_outcome(args.dam)
    realized = _subperiod_profile(args.realized, args.periods_per_hour)
    rtm = realtime.simulate_rtm(system, dam, realized, gap_tol=args.gap_tol)
    print(
        f"total cost {rtm.total_cost:.2f} USD "
        f"(commitment {rtm.commitment_cost:.2f}, dispatch {rtm.dispatch_cost:.2f}, "
        f"curtailment {rtm.curtailment_cost:.2f}); shed {rtm.shed_mwh:.3f} MWh"
    )
    if args.settlement_out:
        rep = settlement.settle(system, dam, rtm, mode=args.settlement)
        settlement.save_settlement(rep, args.settlement_out)
        print(
            f"settlement ({rep.mode}): frp payments {rep.total_frp_payment:.2f} USD, "
            f"make-whole {rep.total_make_whole:.2f} USD -> {args.settlement_out}"
        )
    return 0


def _cmd_sweep(args):
    system = load_system(args.system)
    forecast = _hourly_profile(args.forecast, args.periods_per_hour)
    dams = {}
    for spec in args.dam:
        name, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--dam wants NAME=FILE, got {spec!r}")
        dams[name] = dayahead.load_dam_outcome(path)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    rows = realtime.stress_sweep(
        system, dams, forecast, sigmas, args.rho, args.seed, day=args.day
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "day", "sigma_frac", "cost_usd", "shed_mwh"])
        for r in rows:
            writer.writerow(
                [
                    r["method"],
                    args.day,
                    f"{r['sigma_frac']:.6f}",
                    f"{r['cost_usd']:.2f}",
                    f"{r['shed_mwh']:.6f}",
                ]
            )
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return 0


def _cmd_run(args):
    cfg, system = harness.load_config(args.config)
    result = harness.run_experiment(system, cfg, args.out, workers=args.workers)
    print(
        f"cells done {len(result.done)}, skipped {len(result.skipped)}, "
        f"failed {len(result.failed)}; stochastic-pass solves {result.suc_pass_solves}"
    )
    for cell, err in sorted(result.failed.items()):
        print(f"  FAILED {cell}: {err}", file=sys.stderr)
    return 0 if result.clean else 2


def _cmd_report(args):
    cells = harness.aggregate(args.ledger)
    if not cells:
        print(f"no finished cells under {args.ledger}", file=sys.stderr)
        return 1
    cells_csv, totals_csv = harness.write_reports(args.ledger)
    print(f"{len(cells)} cells -> {cells_csv}, {totals_csv}")
    width = max(len(c) for c in cells)
    print(f"{'cell':<{width}}  {'cost_usd':>14} {'shed_mwh':>10} {'frp_usd':>12}")
    for cell_id, rec in sorted(cells.items()):
        print(
            f"{cell_id:<{width}}  {rec['rtm']['total_cost_usd']:>14.2f} "
            f"{rec['rtm']['shed_mwh']:>10.3f} "
            f"{rec['settlement']['total_frp_payment_usd']:>12.2f}"
        )
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="frp-sim",
        description="Two-pass flexible-ramp procurement simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a system file against all invariants")
    p.add_argument("system")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("gen-scenarios", help="draw net-load error scenarios")
    p.add_argument("--system", required=True)
    p.add_argument("--forecast", required=True, help="hourly per-bus net load CSV")
    p.add_argument("--periods-per-hour", type=int, default=1)
    p.add_argument("--sigma", type=float, required=True, help="error std as a fraction of forecast")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_scenarios)

    p = sub.add_parser("suc-solve", help="solve the stochastic commitment pass")
    p.add_argument("--system", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--dump-lp", default=None)
    p.set_defaults(func=_cmd_suc_solve)

    p = sub.add_parser("frp-req", help="write an hourly requirements CSV")
    p.add_argument("--method", required=True, choices=["suc", "p90", "p95", "p99"])
    p.add_argument("--solution", help="stochastic pass solution JSON (method suc)")
    p.add_argument("--scenarios", help="scenario JSON the solution was solved on")
    p.add_argument("--forecast", help="hourly per-bus net load CSV (percentile methods)")
    p.add_argument("--periods-per-hour", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.03)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_frp_req)

    p = sub.add_parser("dam-clear", help="clear and price the day-ahead market")
    p.add_argument("--system", required=True)
    p.add_argument("--bids", required=True, help="hourly per-bus net demand CSV")
    p.add_argument("--req", required=True, help="requirements CSV")
    p.add_argument("--fix-commitments", help="stochastic solution JSON to floor commitments")
    p.add_argument("--out", required=True)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--dump-lp", default=None)
    p.set_defaults(func=_cmd_dam_clear)

    p = sub.add_parser("rtm-sim", help="re-dispatch a DAM schedule against a realization")
    p.add_argument("--system", required=True)
    p.add_argument("--dam", required=True)
    p.add_argument("--realized", required=True, help="sub-period per-bus net load CSV")
    p.add_argument("--periods-per-hour", type=int, default=1)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--settlement", choices=list(settlement.MODES), default="two")
    p.add_argument("--settlement-out", help="write the settlement ledger CSV here")
    p.set_defaults(func=_cmd_rtm_sim)

    p = sub.add_parser("sweep", help="stress DAM schedules over growing error spread")
    p.add_argument("--system", required=True)
    p.add_argument("--forecast", required=True)
    p.add_argument("--periods-per-hour", type=int, default=1)
    p.add_argument("--dam", action="append", required=True, metavar="NAME=FILE")
    p.add_argument("--sigmas", required=True, help="comma-separated fractions")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--day", default="day0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("run", help="run a configured benchmark grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="summarize a run ledger directory")
    p.add_argument("--ledger", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
