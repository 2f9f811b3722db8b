"""Command line front end.

Subcommands cover the full workflow: fit a sink polar from flight
data, plan a mission's trajectories, fly a mission closed-loop, score
an existing log, and sweep a mission parameter over several values.

Every subcommand validates its inputs fully before touching the
filesystem; on any failure it exits nonzero having written nothing.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .aero import Airframe, SinkPolar, fit_polar, polar_from_airframe
from .mission import (
    Metrics,
    MissionParseError,
    MetricsError,
    build_legs,
    compute_metrics,
    emit_plot_data,
    list_scenarios,
    load_airframe,
    parse_mission,
    run_mission,
    scenario_path,
)
from .planner import PlanInfeasibleError, assemble_nlp
from .simulator import SensorModel, SimLog, SimOptions

__all__ = ["main"]

# the benchmark airframe used throughout the scenario suite; its polar
# is fitted from its own drag model when no airframe file is given
DEFAULT_AIRFRAME = Airframe(m=1.5, S=0.4, AR=6.0, e=0.9, C_D0=0.03)

POLAR_CSV_HEADER = ("va_mps", "phi_rad", "vz_mps")


class CliError(Exception):
    """Input or configuration problem reported to the user."""


# ----------------------------------------------------------------------
# Output staging: nothing hits the disk until a command succeeds
# ----------------------------------------------------------------------
class _Outputs:
    def __init__(self, out_dir: str | None):
        self.out_dir = out_dir
        self.files: list[tuple[str, str]] = []

    def add(self, rel: str, text: str) -> None:
        if self.out_dir is not None:
            self.files.append((rel, text))

    def flush(self) -> list[str]:
        written = []
        for rel, text in self.files:
            path = Path(self.out_dir) / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            written.append(str(path))
        return written


# ----------------------------------------------------------------------
# Shared input plumbing
# ----------------------------------------------------------------------
def _resolve_mission(arg: str) -> str:
    if Path(arg).exists():
        return arg
    names = list_scenarios()
    if arg in names:
        return scenario_path(arg)
    raise CliError(
        f"no mission file or packaged scenario named '{arg}' "
        f"(scenarios: {', '.join(names)})"
    )


def _resolve_airframe(path: str | None) -> tuple[Airframe, SinkPolar]:
    if path is None:
        airframe = DEFAULT_AIRFRAME
        polar = None
    else:
        airframe, polar = load_airframe(path)
    if polar is None:
        polar, _ = polar_from_airframe(airframe)
    return airframe, polar


def _sim_options(args, plan) -> SimOptions:
    interval = (
        args.replan_interval
        if args.replan_interval is not None
        else plan.replan_interval
    )
    if args.dt <= 0.0:
        raise CliError("--dt must be positive")
    if interval <= 0.0:
        raise CliError("--replan-interval must be positive")
    return SimOptions(dt=args.dt, replan_interval=interval)


def _read_polar_csv(path: str) -> list[tuple[float, float, float]]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise CliError(f"{path}: empty polar file") from None
            if tuple(h.strip() for h in header) != POLAR_CSV_HEADER:
                raise CliError(
                    f"{path}: expected header "
                    f"'{','.join(POLAR_CSV_HEADER)}', got "
                    f"'{','.join(header)}'"
                )
            rows = []
            for i, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise CliError(
                        f"{path}:{i}: expected 3 columns, got {len(row)}"
                    )
                try:
                    rows.append(tuple(float(c) for c in row))
                except ValueError:
                    raise CliError(
                        f"{path}:{i}: non-numeric value in "
                        f"'{','.join(row)}'"
                    ) from None
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from None
    return rows


def _airframe_doc(airframe: Airframe, polar: SinkPolar) -> str:
    doc = {
        "m": airframe.m, "S": airframe.S, "AR": airframe.AR,
        "e": airframe.e, "C_D0": airframe.C_D0,
        "rho": airframe.rho, "g": airframe.g,
        "polar": {"P": polar.P, "B": polar.B},
    }
    return yaml.safe_dump(doc, sort_keys=False)


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------
def _cmd_fit_polar(args, out: _Outputs) -> None:
    airframe, _ = _resolve_airframe(args.airframe)
    rows = _read_polar_csv(args.polar_csv)
    try:
        polar, rms = fit_polar(rows, airframe)
    except ValueError as e:
        raise CliError(f"{args.polar_csv}: {e}") from None
    print(f"P = {polar.P:.6g}")
    print(f"B = {polar.B:.6g}")
    print(f"rms = {rms:.6g} m/s over {len(rows)} samples")
    out.add("airframe_fitted.yaml", _airframe_doc(airframe, polar))


def _leg_records(legs, dump_nlp: bool):
    records = []
    nlp_records = []
    for i, leg in enumerate(legs):
        rep = leg.report
        records.append({
            "leg": i,
            "mode": leg.problem.mode,
            "t0": leg.trajectory.t0,
            "tf": leg.trajectory.tf,
            "segments": len(leg.trajectory),
            "cost": None if rep is None else rep.cost,
            "max_violation": None if rep is None else rep.max_violation,
            "trajectory": leg.trajectory.to_dict(),
        })
        if dump_nlp:
            nlp_records.append(assemble_nlp(leg.problem).dump())
    return records, nlp_records


def _cmd_plan(args, out: _Outputs) -> None:
    airframe, polar = _resolve_airframe(args.airframe)
    plan = parse_mission(_resolve_mission(args.mission))
    legs = build_legs(plan, airframe, polar)
    records, nlp_records = _leg_records(legs, args.dump_nlp)
    for rec in records:
        print(
            f"leg {rec['leg']} {rec['mode']:6s} "
            f"t=[{rec['t0']:.1f}, {rec['tf']:.1f}] s  "
            f"segments={rec['segments']}  cost={rec['cost']:.4g}  "
            f"max_violation={rec['max_violation']:.2e}"
        )
    out.add("trajectory.json", json.dumps(records, indent=1))
    if args.dump_nlp:
        out.add("nlp.json", json.dumps(nlp_records, indent=1))


def _cmd_simulate(args, out: _Outputs) -> None:
    airframe, polar = _resolve_airframe(args.airframe)
    plan = parse_mission(_resolve_mission(args.mission))
    opts = _sim_options(args, plan)
    sensors = SensorModel(seed=args.seed)
    t_start = time.perf_counter()
    log, metrics = run_mission(
        plan, airframe, polar, sensors=sensors, opts=opts
    )
    wall = time.perf_counter() - t_start
    if log.tracking_failure:
        raise CliError(
            "closed-loop run diverged from the plan; no outputs written"
        )
    print(metrics.text(), end="")
    print(f"rows = {len(log)}  wall = {wall:.1f} s")
    out.add("simlog.csv", log.csv_text())
    out.add("metrics.txt", metrics.text())
    out.add(
        "metrics.csv",
        Metrics.csv_header() + "\n" + metrics.csv_line() + "\n",
    )
    for key, text in emit_plot_data(log, plan).items():
        out.add(f"plots/{key}.csv", text)
    if args.dump_nlp:
        legs = build_legs(plan, airframe, polar)
        _, nlp_records = _leg_records(legs, True)
        out.add("nlp.json", json.dumps(nlp_records, indent=1))


def _cmd_evaluate(args, out: _Outputs) -> None:
    airframe, polar = _resolve_airframe(args.airframe)
    plan = parse_mission(_resolve_mission(args.mission))
    try:
        log = SimLog.from_csv(args.log_csv)
    except OSError as e:
        raise CliError(f"{args.log_csv}: {e.strerror}") from None
    except ValueError as e:
        raise CliError(f"{args.log_csv}: {e}") from None
    metrics = compute_metrics(log, plan, airframe, polar)
    print(metrics.text(), end="")
    out.add("metrics.txt", metrics.text())
    out.add(
        "metrics.csv",
        Metrics.csv_header() + "\n" + metrics.csv_line() + "\n",
    )


# sweep workers re-parse the mission text so each process validates and
# plans independently; dataclass args all pickle cleanly
def _sweep_one(payload: dict) -> dict:
    plan = parse_mission(payload["text"], source=payload["source"])
    airframe = Airframe(**payload["airframe"])
    polar = SinkPolar(*payload["polar"])
    opts = SimOptions(
        dt=payload["dt"],
        replan_interval=(
            payload["replan_interval"]
            if payload["replan_interval"] is not None
            else plan.replan_interval
        ),
    )
    sensors = SensorModel(seed=payload["seed"])
    log, metrics = run_mission(
        plan, airframe, polar, sensors=sensors, opts=opts
    )
    if log.tracking_failure:
        raise CliError(
            f"{payload['label']}: closed-loop run diverged from the plan"
        )
    return {"label": payload["label"], "metrics": metrics.as_dict()}


def _set_by_path(doc, path: str, value) -> None:
    keys = path.split(".")
    cur = doc
    trail = []
    for key in keys[:-1]:
        trail.append(key)
        where = ".".join(trail)
        if isinstance(cur, list):
            try:
                cur = cur[int(key)]
            except (ValueError, IndexError):
                raise CliError(
                    f"sweep path '{path}': no list index '{key}' "
                    f"at '{where}'"
                ) from None
        elif isinstance(cur, dict):
            if key not in cur:
                cur[key] = {}
            cur = cur[key]
        else:
            raise CliError(
                f"sweep path '{path}': '{where}' is a scalar"
            )
    last = keys[-1]
    if isinstance(cur, list):
        try:
            cur[int(last)] = value
        except (ValueError, IndexError):
            raise CliError(
                f"sweep path '{path}': no list index '{last}'"
            ) from None
    elif isinstance(cur, dict):
        cur[last] = value
    else:
        raise CliError(f"sweep path '{path}' lands on a scalar")


def _cmd_sweep(args, out: _Outputs) -> None:
    airframe, polar = _resolve_airframe(args.airframe)
    src = _resolve_mission(args.mission)
    text = Path(src).read_text(encoding="utf-8")
    parse_mission(text, source=src)  # fail early on the base mission
    try:
        values = yaml.safe_load("[" + args.values + "]")
    except yaml.YAMLError as e:
        raise CliError(f"--values: invalid list: {e}") from None
    if not isinstance(values, list) or not values:
        raise CliError("--values must name at least one value")

    payloads = []
    for value in values:
        doc = yaml.safe_load(text)
        _set_by_path(doc, args.param, value)
        variant = yaml.safe_dump(doc, sort_keys=False)
        label = json.dumps(value)
        # each variant must parse before any worker starts
        parse_mission(variant, source=f"{src}[{args.param}={label}]")
        payloads.append({
            "text": variant,
            "source": src,
            "label": label,
            "airframe": {
                "m": airframe.m, "S": airframe.S, "AR": airframe.AR,
                "e": airframe.e, "C_D0": airframe.C_D0,
                "rho": airframe.rho, "g": airframe.g,
            },
            "polar": (polar.P, polar.B),
            "seed": args.seed,
            "dt": args.dt,
            "replan_interval": args.replan_interval,
        })

    results = []
    if args.jobs == 1 or len(payloads) == 1:
        for p in payloads:
            results.append(_sweep_one(p))
    else:
        workers = args.jobs or min(len(payloads), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, payloads))

    buf = io.StringIO()
    buf.write(Metrics.csv_header(args.param) + "\n")
    for res in results:
        m = Metrics(**res["metrics"])
        line = m.csv_line(res["label"])
        buf.write(line + "\n")
        print(line)
    out.add("sweep.csv", buf.getvalue())


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glideplan",
        description=(
            "Energy-aware Bernstein-polynomial trajectory planning and "
            "closed-loop glide simulation for small fixed-wing aircraft."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=False, nlp=False):
        p.add_argument(
            "--airframe", metavar="YAML", default=None,
            help="airframe file (default: built-in 1.5 kg benchmark)",
        )
        p.add_argument(
            "--out", metavar="DIR", default=None,
            help="directory for output files (default: print only)",
        )
        if sim:
            p.add_argument(
                "--seed", type=int, default=0,
                help="sensor noise seed (default 0)",
            )
            p.add_argument(
                "--dt", type=float, default=0.01,
                help="integration step in seconds (default 0.01)",
            )
            p.add_argument(
                "--replan-interval", type=float, default=None,
                help="replan period in seconds (default: mission value)",
            )
        if nlp:
            p.add_argument(
                "--dump-nlp", action="store_true",
                help="also write assembled NLP dimensions and bounds",
            )

    p = sub.add_parser(
        "fit-polar",
        help="fit sink-polar coefficients P, B from a flight-data CSV",
    )
    p.add_argument(
        "polar_csv",
        help=f"CSV with header {','.join(POLAR_CSV_HEADER)}",
    )
    common(p)
    p.set_defaults(func=_cmd_fit_polar)

    p = sub.add_parser(
        "plan", help="plan a mission's trajectories without flying them"
    )
    p.add_argument("mission", help="mission file or scenario name")
    common(p, nlp=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser(
        "simulate", help="plan and fly a mission closed-loop"
    )
    p.add_argument("mission", help="mission file or scenario name")
    common(p, sim=True, nlp=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "evaluate", help="score an existing run log against a mission"
    )
    p.add_argument("log_csv", help="simulation log CSV")
    p.add_argument(
        "--mission", required=True,
        help="mission file or scenario name the log flew",
    )
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser(
        "sweep",
        help="fly one mission repeatedly while varying one parameter",
    )
    p.add_argument("mission", help="mission file or scenario name")
    p.add_argument(
        "--param", required=True,
        help="dotted path into the mission, e.g. weights.glide.sigma0",
    )
    p.add_argument(
        "--values", required=True,
        help="comma-separated values, e.g. '1, 5, 10' or '[5,0,0],[8,0,0]'",
    )
    p.add_argument(
        "--jobs", type=int, default=0,
        help="worker processes (default: one per value up to CPU count)",
    )
    common(p, sim=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = _Outputs(args.out)
    try:
        args.func(args, out)
    except (
        CliError, MissionParseError, MetricsError, PlanInfeasibleError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        written = out.flush()
    except OSError as e:
        print(f"error: writing outputs: {e}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
