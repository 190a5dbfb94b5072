"""
Command line interface: cql-switch plan|expel|transfer|attract|switch|stress|ballistic|validate
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import pandas as pd

from cql_switch import settings
from cql_switch.config import build_params
from cql_switch.exceptions import CqlSwitchException
from cql_switch.report import export_control, export_report, write_frame
from cql_switch.switch import CqlSwitch
from cql_switch.validate import run_suite

logger = logging.getLogger("cql_switch")


def _shared(parser: argparse.ArgumentParser):
    parser.add_argument("--preset", help="Preset row, one of " + ", ".join(settings.FIGURES))
    parser.add_argument("--config", help="key=value parameter file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                        help="Override one parameter (repeatable)")
    parser.add_argument("--lambda", dest="lam", type=float, help="Perturbation parameter")
    parser.add_argument("--k-target", dest="K", type=float, help="Target latitude K")
    parser.add_argument("--beta-e", dest="beta_e", type=float,
                        help="Unscaled expulsion current (default lambda * beta_e_t)")
    parser.add_argument("--out", default="out", help="Output directory")
    parser.add_argument("--rtol", type=float, default=settings.DEFAULT_RTOL)
    parser.add_argument("--atol", type=float, default=settings.DEFAULT_ATOL)
    parser.add_argument("--dt-export", dest="dt", type=float, default=settings.DEFAULT_DT_EXPORT)
    parser.add_argument("--t-max", dest="t_max", type=float, help="Attraction/relaxation time budget")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cql-switch", description="CQL magnetization switching")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("plan", "Plan the three stages and write plan.json"),
        ("transfer", "Transfer plan and drift from the latitude"),
        ("switch", "Full switching run"),
    ):
        _shared(sub.add_parser(name, help=help_text))

    expel = sub.add_parser("expel", help="Expulsion error series against the first-order solution")
    _shared(expel)
    expel.add_argument("--rho-e", dest="rho_e", type=float, default=1.0,
                       help="Shadowing radius factor for the expulsion thresholds")

    attract = sub.add_parser("attract", help="Relaxation from the basin boundary")
    _shared(attract)
    attract.add_argument("--delta-a", dest="delta_a", type=float, default=0.0)
    attract.add_argument("--boundary-samples", dest="boundary_samples", type=int, default=20,
                         help="Number of starting points on the basin boundary")

    stress = sub.add_parser("stress", help="Mistimed control runs")
    _shared(stress)
    stress.add_argument("--j", dest="factors", type=float, action="append",
                        help="Time factor (repeatable, default 0.98 and 1.02)")

    ballistic = sub.add_parser("ballistic", help="Constant-current baseline")
    _shared(ballistic)
    ballistic.add_argument("--beta-const", dest="beta_const", type=float,
                           help="Unscaled constant current (default beta_e)")
    ballistic.add_argument("--t-on", dest="T_on", type=float, help="Pulse length (default T_e + T_tr)")

    validate = sub.add_parser("validate", help="Figure reproduction and acceptance checks")
    validate.add_argument("--out", default="out")
    validate.add_argument("--only", action="append", help="Restrict to a figure id (repeatable)")
    validate.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _switch(args) -> CqlSwitch:
    raw = build_params(args.preset, args.config, args.overrides, args.lam, args.K)
    return CqlSwitch(raw, rtol=args.rtol, atol=args.atol)


def _write_json(data, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
    return path


def _write_attraction(results, out: str):
    """One trajectory CSV per boundary point plus the (t, W) series of all runs."""
    series = []
    for i, result in enumerate(results):
        frame = result.trajectory.to_frame()
        frame["W"] = result.W_series
        write_frame(frame, os.path.join(out, f"attraction_{i}.csv"))
        series.append(pd.DataFrame({"point": i, "t": result.times, "W": result.W_series}))
    write_frame(pd.concat(series, ignore_index=True), os.path.join(out, "attraction_W.csv"))


def _emit_report(report, out: str, name: str, dt: float):
    export_report(report, settings.EXPORT_JSON, os.path.join(out, f"{name}.json"))
    export_report(report, settings.EXPORT_CSV, os.path.join(out, f"{name}.csv"), dt)
    print(f"{name}: success={report.success} dist={report.dist_to_s_plus:.3e} "
          f"radius={report.success_radius:.3e} psi_drift={report.psi_drift:.2e}")


def run(args) -> int:
    if args.command == "validate":
        checks = run_suite(args.out, args.only)
        for check in checks:
            print(f"{'ok  ' if check.passed else 'FAIL'} {check.name}: {check.value:.6g} {check.detail}")
        return 0 if all(check.passed for check in checks) else 1

    switch = _switch(args)
    # attraction-only presets carry no expulsion current, so this runs unplanned
    if args.command == "attract":
        results = switch.attract(args.delta_a, args.boundary_samples, args.t_max)
        _write_attraction(results, args.out)
        frame = pd.DataFrame([
            {"point": i, "t_converged": r.t_converged, "converged": r.converged,
             "U1": r.U_infinity[0], "U2": r.U_infinity[1], "U3": r.U_infinity[2]}
            for i, r in enumerate(results)
        ])
        write_frame(frame, os.path.join(args.out, "attraction.csv"))
        return 0 if all(r.converged for r in results) else 1

    plan = switch.plan(beta_e=args.beta_e)

    if args.command == "plan":
        _write_json(plan.to_dict(), os.path.join(args.out, "plan.json"))
        export_control(plan.waveform, os.path.join(args.out, "control.csv"), args.dt)
        print(f"T_e={plan.expulsion.T_e:.6f} T_tr={plan.transfer.T_tr:.6f} "
              f"total={plan.total_control_time:.6f}")

    elif args.command == "expel":
        expulsion, frame = switch.expel(rho_e=args.rho_e, dt=args.dt)
        write_frame(frame, os.path.join(args.out, "expulsion.csv"))
        _write_json(expulsion.to_dict(), os.path.join(args.out, "expulsion.json"))

    elif args.command == "transfer":
        transfer, drift = switch.transfer()
        data = transfer.to_dict()
        data["drift"] = drift
        _write_json(data, os.path.join(args.out, "transfer.json"))
        export_control(plan.waveform, os.path.join(args.out, "control.csv"), args.dt)
        print(f"T_tr={transfer.T_tr:.6f} drift={drift:.3e}")

    elif args.command == "switch":
        report = switch.switch(t_attract_max=args.t_max)
        export_control(plan.waveform, os.path.join(args.out, "control.csv"), args.dt, report)
        _emit_report(report, args.out, "switch", args.dt)
        return 0 if report.success else 1

    elif args.command == "stress":
        for j in args.factors or settings.STRESS_FACTORS:
            stretched, dilated = switch.stress(j, t_attract_max=args.t_max)
            _emit_report(stretched, args.out, f"stress_expulsion_{j:g}", args.dt)
            _emit_report(dilated, args.out, f"stress_transfer_{j:g}", args.dt)

    elif args.command == "ballistic":
        report = switch.ballistic(args.beta_const, args.T_on, t_relax_max=args.t_max)
        _emit_report(report, args.out, "ballistic", args.dt)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return run(args)
    except CqlSwitchException as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
