"""Mission files, scenario orchestration, metrics, and plot-data export.

A mission is a YAML document listing waypoints (each opening a cruise or
glide segment), cost weights per mode, path-constraint bounds, obstacles
and the wind environment. Parsing validates against the schema with
line-anchored messages so a bad field points at the offending line, not
just the document.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .aero import Airframe, SinkPolar, sink_rate
from .dubins import Pose2D
from .planner import (
    CostWeights,
    GaussianObstacle,
    PlanProblem,
    cruise_endpoint_states,
    default_constraints,
    dubins_seed_waypoints,
    glide_endpoint_states,
    plan_cruise,
    plan_glide,
)
from .simulator import (
    SensorModel,
    SimLog,
    SimOptions,
    SimpleLeg,
    WindField,
    run_closed_loop,
)

__all__ = [
    "MissionParseError",
    "MetricsError",
    "Waypoint",
    "ConstraintSpec",
    "MissionPlan",
    "Metrics",
    "parse_mission",
    "serialize_mission",
    "load_airframe",
    "save_airframe",
    "build_legs",
    "run_mission",
    "compute_metrics",
    "emit_plot_data",
    "METRICS_FIELDS",
    "list_scenarios",
    "scenario_path",
]

# glide references outside the fitted polar grid extrapolate the
# regression; reject them at parse time
POLAR_FIT_RANGE = (8.0, 18.0)

METRICS_FIELDS = (
    "rmse_va",
    "rmse_vz",
    "rmse_enet",
    "glide_distance_m",
    "altitude_loss_m",
    "glide_ratio",
    "min_obstacle_clearance_m",
)


class MissionParseError(ValueError):
    """Mission schema violation; message carries file:line context."""


def list_scenarios() -> list[str]:
    """Names of the mission files shipped with the package."""
    root = resources.files("glideplan") / "scenarios"
    return sorted(
        p.name[: -len(".yaml")]
        for p in root.iterdir()
        if p.name.endswith(".yaml")
    )


def scenario_path(name: str) -> str:
    """Filesystem path of a shipped scenario by bare name."""
    root = resources.files("glideplan") / "scenarios"
    p = root / f"{name}.yaml"
    if not p.is_file():
        known = ", ".join(list_scenarios())
        raise FileNotFoundError(
            f"no shipped scenario {name!r}; available: {known}"
        )
    return str(p)


class MetricsError(ValueError):
    """Raised when a log cannot support the requested metrics."""


# ----------------------------------------------------------------------
# Mission model
# ----------------------------------------------------------------------
@dataclass
class Waypoint:
    """Mission waypoint; mode and va_ref shape the segment it opens."""

    x: float
    y: float
    z: float
    mode: str = "cruise"
    va_ref: float | None = None

    @property
    def pos(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass
class ConstraintSpec:
    """Path-constraint bounds shared by every segment of a mission."""

    phi_max_deg: float = 30.0
    speed_slack: float = 1.2
    vz_band: float = 0.5
    d_safe: float = 20.0


@dataclass
class MissionPlan:
    """Validated mission description; the unit of CLI work."""

    waypoints: list
    weights: dict = field(
        default_factory=lambda: {
            "cruise": CostWeights(10.0, 0.1, 0.1),
            "glide": CostWeights(10.0, 0.1, 0.1),
        }
    )
    constraints: ConstraintSpec = field(default_factory=ConstraintSpec)
    obstacles: list = field(default_factory=list)
    wind: WindField = field(default_factory=WindField)
    replan_interval: float = 1.0
    n_segments: int = 3
    name: str = ""

    @property
    def segments(self) -> list:
        """(start_wp, end_wp) pairs; the start waypoint sets the mode."""
        return list(zip(self.waypoints[:-1], self.waypoints[1:]))


@dataclass
class Metrics:
    """Per-run summary over the glide-mode rows of a log."""

    rmse_va: float
    rmse_vz: float
    rmse_enet: float
    glide_distance_m: float
    altitude_loss_m: float
    glide_ratio: float
    min_obstacle_clearance_m: float

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in METRICS_FIELDS}

    def text(self) -> str:
        lines = [f"{k} = {getattr(self, k):.6g}" for k in METRICS_FIELDS]
        return "\n".join(lines) + "\n"

    def csv_line(self, prefix: str = "") -> str:
        vals = ",".join(f"{getattr(self, k):.6g}" for k in METRICS_FIELDS)
        return (prefix + "," if prefix else "") + vals

    @staticmethod
    def csv_header(prefix: str = "") -> str:
        return (prefix + "," if prefix else "") + ",".join(METRICS_FIELDS)


# ----------------------------------------------------------------------
# Line-anchored YAML walking
# ----------------------------------------------------------------------
class _Ctx:
    def __init__(self, source: str):
        self.source = source

    def err(self, node, msg: str) -> MissionParseError:
        line = node.start_mark.line + 1 if node is not None else 0
        return MissionParseError(f"{self.source}:{line}: {msg}")


def _plain(node):
    """Plain-Python value of a composed YAML node."""
    return yaml.safe_load(yaml.serialize(node))


def _as_map(ctx: _Ctx, node, what: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ctx.err(node, f"{what} must be a mapping")
    out = {}
    for k, v in node.value:
        key = str(_plain(k))
        if key in out:
            raise ctx.err(k, f"duplicate key {key!r} in {what}")
        out[key] = (k, v)
    return out


def _as_seq(ctx: _Ctx, node, what: str) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise ctx.err(node, f"{what} must be a sequence")
    return list(node.value)


def _float(ctx: _Ctx, node, what: str) -> float:
    v = _plain(node)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ctx.err(node, f"{what} must be a number, got {v!r}")
    return float(v)


def _vec(ctx: _Ctx, node, what: str, n: int) -> tuple:
    v = _plain(node)
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ctx.err(node, f"{what} must be a {n}-vector")
    try:
        return tuple(float(c) for c in v)
    except (TypeError, ValueError):
        raise ctx.err(node, f"{what} must contain numbers") from None


def _reject_unknown(ctx: _Ctx, entries: dict, allowed, what: str):
    for key, (knode, _vnode) in entries.items():
        if key not in allowed:
            raise ctx.err(knode, f"unknown field {key!r} in {what}")


# ----------------------------------------------------------------------
def _parse_waypoints(ctx: _Ctx, node) -> list:
    items = _as_seq(ctx, node, "waypoints")
    if len(items) < 2:
        raise ctx.err(node, "mission needs at least 2 waypoints")
    wps = []
    for i, item in enumerate(items):
        entries = _as_map(ctx, item, f"waypoints[{i}]")
        _reject_unknown(
            ctx, entries,
            {"x", "y", "z", "mode", "va_ref", "Va_ref"},
            f"waypoints[{i}]",
        )
        vals = {}
        for req in ("x", "y", "z"):
            if req not in entries:
                raise ctx.err(item, f"waypoints[{i}] missing field {req!r}")
            vals[req] = _float(ctx, entries[req][1], f"waypoints[{i}].{req}")
        mode = "cruise"
        if "mode" in entries:
            mode = str(_plain(entries["mode"][1]))
            if mode not in ("cruise", "glide"):
                raise ctx.err(
                    entries["mode"][1],
                    f"waypoints[{i}].mode must be cruise or glide, "
                    f"got {mode!r}",
                )
        va_ref = None
        va_key = "va_ref" if "va_ref" in entries else (
            "Va_ref" if "Va_ref" in entries else None
        )
        if va_key is not None:
            va_ref = _float(
                ctx, entries[va_key][1], f"waypoints[{i}].va_ref"
            )
            if va_ref <= 0.0:
                raise ctx.err(
                    entries[va_key][1],
                    f"waypoints[{i}].va_ref must be positive",
                )
        wps.append(
            (Waypoint(vals["x"], vals["y"], vals["z"], mode, va_ref), item)
        )

    # segment-level checks: the start waypoint defines the segment
    out = []
    for i, (wp, item) in enumerate(wps):
        if i < len(wps) - 1:
            if wp.mode == "glide":
                if wp.va_ref is None:
                    raise ctx.err(
                        item,
                        f"glide segment starting at waypoints[{i}] "
                        "requires va_ref",
                    )
                lo, hi = POLAR_FIT_RANGE
                if not lo <= wp.va_ref <= hi:
                    raise ctx.err(
                        item,
                        f"waypoints[{i}].va_ref {wp.va_ref:g} outside the "
                        f"fitted polar range [{lo:g}, {hi:g}]",
                    )
            elif wp.va_ref is None:
                wp.va_ref = 15.0
        out.append(wp)
    return out


def _parse_weights(ctx: _Ctx, node, defaults: dict) -> dict:
    entries = _as_map(ctx, node, "weights")
    _reject_unknown(ctx, entries, {"cruise", "glide"}, "weights")
    out = dict(defaults)
    for mode in ("cruise", "glide"):
        if mode not in entries:
            continue
        sub = _as_map(ctx, entries[mode][1], f"weights.{mode}")
        _reject_unknown(
            ctx, sub, {"sigma0", "sigma1", "sigma2"}, f"weights.{mode}"
        )
        base = defaults[mode]
        vals = {
            k: (
                _float(ctx, sub[k][1], f"weights.{mode}.{k}")
                if k in sub
                else getattr(base, k)
            )
            for k in ("sigma0", "sigma1", "sigma2")
        }
        try:
            out[mode] = CostWeights(**vals)
        except ValueError as e:
            raise ctx.err(entries[mode][1], f"weights.{mode}: {e}") from None
    return out


def _parse_constraints(ctx: _Ctx, node) -> ConstraintSpec:
    entries = _as_map(ctx, node, "constraints")
    allowed = {"phi_max_deg", "speed_slack", "vz_band", "d_safe"}
    _reject_unknown(ctx, entries, allowed, "constraints")
    spec = ConstraintSpec()
    for key in allowed:
        if key in entries:
            val = _float(ctx, entries[key][1], f"constraints.{key}")
            if key != "d_safe" and val <= 0.0:
                raise ctx.err(
                    entries[key][1], f"constraints.{key} must be positive"
                )
            if key == "d_safe" and val < 0.0:
                raise ctx.err(
                    entries[key][1], "constraints.d_safe must be nonnegative"
                )
            setattr(spec, key, val)
    return spec


def _parse_obstacles(ctx: _Ctx, node) -> list:
    items = _as_seq(ctx, node, "obstacles")
    out = []
    for i, item in enumerate(items):
        entries = _as_map(ctx, item, f"obstacles[{i}]")
        allowed = {"x", "y", "sigma", "sigma_x", "sigma_y", "h", "hard"}
        _reject_unknown(ctx, entries, allowed, f"obstacles[{i}]")
        for req in ("x", "y"):
            if req not in entries:
                raise ctx.err(item, f"obstacles[{i}] missing field {req!r}")
        x = _float(ctx, entries["x"][1], f"obstacles[{i}].x")
        y = _float(ctx, entries["y"][1], f"obstacles[{i}].y")
        if "sigma" in entries:
            sx = sy = _float(ctx, entries["sigma"][1], f"obstacles[{i}].sigma")
        else:
            if "sigma_x" not in entries or "sigma_y" not in entries:
                raise ctx.err(
                    item,
                    f"obstacles[{i}] needs sigma or both sigma_x, sigma_y",
                )
            sx = _float(ctx, entries["sigma_x"][1], f"obstacles[{i}].sigma_x")
            sy = _float(ctx, entries["sigma_y"][1], f"obstacles[{i}].sigma_y")
        h = 50.0
        if "h" in entries:
            h = _float(ctx, entries["h"][1], f"obstacles[{i}].h")
        hard = False
        if "hard" in entries:
            hv = _plain(entries["hard"][1])
            if not isinstance(hv, bool):
                raise ctx.err(
                    entries["hard"][1], f"obstacles[{i}].hard must be boolean"
                )
            hard = hv
        try:
            out.append(
                GaussianObstacle(
                    x_o=x, y_o=y, h=h, sigma_x=sx, sigma_y=sy, hard=hard
                )
            )
        except ValueError as e:
            raise ctx.err(item, f"obstacles[{i}]: {e}") from None
    return out


def _parse_wind(ctx: _Ctx, node) -> WindField:
    entries = _as_map(ctx, node, "wind")
    allowed = {"steady", "gusts", "columns", "steps"}
    _reject_unknown(ctx, entries, allowed, "wind")
    steady = (0.0, 0.0, 0.0)
    if "steady" in entries:
        steady = _vec(ctx, entries["steady"][1], "wind.steady", 3)
    gusts = []
    if "gusts" in entries:
        for i, item in enumerate(_as_seq(ctx, entries["gusts"][1],
                                         "wind.gusts")):
            sub = _as_map(ctx, item, f"wind.gusts[{i}]")
            _reject_unknown(
                ctx, sub, {"amp", "freq", "phase"}, f"wind.gusts[{i}]"
            )
            for req in ("amp", "freq"):
                if req not in sub:
                    raise ctx.err(
                        item, f"wind.gusts[{i}] missing field {req!r}"
                    )
            amp = _vec(ctx, sub["amp"][1], f"wind.gusts[{i}].amp", 3)
            freq = _float(ctx, sub["freq"][1], f"wind.gusts[{i}].freq")
            if freq <= 0.0:
                raise ctx.err(
                    sub["freq"][1], f"wind.gusts[{i}].freq must be positive"
                )
            phase = 0.0
            if "phase" in sub:
                phase = _float(
                    ctx, sub["phase"][1], f"wind.gusts[{i}].phase"
                )
            gusts.append((amp, freq, phase))
    columns = []
    if "columns" in entries:
        for i, item in enumerate(_as_seq(ctx, entries["columns"][1],
                                         "wind.columns")):
            sub = _as_map(ctx, item, f"wind.columns[{i}]")
            _reject_unknown(
                ctx, sub, {"center", "radius", "w"}, f"wind.columns[{i}]"
            )
            for req in ("center", "radius", "w"):
                if req not in sub:
                    raise ctx.err(
                        item, f"wind.columns[{i}] missing field {req!r}"
                    )
            center = _vec(ctx, sub["center"][1],
                          f"wind.columns[{i}].center", 2)
            radius = _float(ctx, sub["radius"][1],
                            f"wind.columns[{i}].radius")
            if radius <= 0.0:
                raise ctx.err(
                    sub["radius"][1],
                    f"wind.columns[{i}].radius must be positive",
                )
            w = _float(ctx, sub["w"][1], f"wind.columns[{i}].w")
            columns.append((center, radius, w))
    steps = []
    if "steps" in entries:
        for i, item in enumerate(_as_seq(ctx, entries["steps"][1],
                                         "wind.steps")):
            sub = _as_map(ctx, item, f"wind.steps[{i}]")
            _reject_unknown(
                ctx, sub, {"t0", "ramp", "delta"}, f"wind.steps[{i}]"
            )
            for req in ("t0", "ramp", "delta"):
                if req not in sub:
                    raise ctx.err(
                        item, f"wind.steps[{i}] missing field {req!r}"
                    )
            t0 = _float(ctx, sub["t0"][1], f"wind.steps[{i}].t0")
            ramp = _float(ctx, sub["ramp"][1], f"wind.steps[{i}].ramp")
            if ramp <= 0.0:
                raise ctx.err(
                    sub["ramp"][1], f"wind.steps[{i}].ramp must be positive"
                )
            delta = _vec(ctx, sub["delta"][1], f"wind.steps[{i}].delta", 3)
            steps.append((t0, ramp, delta))
    return WindField(
        steady=steady,
        gusts=tuple(gusts),
        columns=tuple(columns),
        steps=tuple(steps),
    )


def parse_mission(path_or_text, source: str | None = None) -> MissionPlan:
    """Parse and validate a mission file (path, file object, or text).

    Errors carry the file name and line of the offending field.
    """
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
        src = source or "<stream>"
    elif isinstance(path_or_text, str) and "\n" not in path_or_text and (
        path_or_text.endswith((".yaml", ".yml")) or "/" in path_or_text
    ):
        src = source or path_or_text
        try:
            with open(path_or_text, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise MissionParseError(f"{src}: {e.strerror}") from None
    else:
        text = str(path_or_text)
        src = source or "<string>"

    ctx = _Ctx(src)
    try:
        root = yaml.compose(io.StringIO(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark else 0
        raise MissionParseError(f"{src}:{line}: invalid YAML: {e}") from None
    if root is None:
        raise MissionParseError(f"{src}:0: empty mission file")

    entries = _as_map(ctx, root, "mission")
    allowed = {
        "name", "waypoints", "weights", "constraints", "obstacles",
        "wind", "replan_interval", "n_segments",
    }
    _reject_unknown(ctx, entries, allowed, "mission")
    if "waypoints" not in entries:
        raise ctx.err(root, "mission missing field 'waypoints'")

    plan = MissionPlan(
        waypoints=_parse_waypoints(ctx, entries["waypoints"][1])
    )
    if "name" in entries:
        plan.name = str(_plain(entries["name"][1]))
    if "weights" in entries:
        plan.weights = _parse_weights(
            ctx, entries["weights"][1], plan.weights
        )
    if "constraints" in entries:
        plan.constraints = _parse_constraints(ctx, entries["constraints"][1])
    if "obstacles" in entries:
        plan.obstacles = _parse_obstacles(ctx, entries["obstacles"][1])
    if "wind" in entries:
        plan.wind = _parse_wind(ctx, entries["wind"][1])
    if "replan_interval" in entries:
        ri = _float(ctx, entries["replan_interval"][1], "replan_interval")
        if ri <= 0.0:
            raise ctx.err(
                entries["replan_interval"][1],
                "replan_interval must be positive",
            )
        plan.replan_interval = ri
    if "n_segments" in entries:
        ns = _plain(entries["n_segments"][1])
        if not isinstance(ns, int) or isinstance(ns, bool) or ns < 1:
            raise ctx.err(
                entries["n_segments"][1],
                "n_segments must be a positive integer",
            )
        plan.n_segments = ns
    return plan


# ----------------------------------------------------------------------
def serialize_mission(plan: MissionPlan) -> str:
    """YAML text that parses back to an identical MissionPlan."""
    doc: dict = {}
    if plan.name:
        doc["name"] = plan.name
    doc["waypoints"] = []
    for wp in plan.waypoints:
        entry = {"x": wp.x, "y": wp.y, "z": wp.z, "mode": wp.mode}
        if wp.va_ref is not None:
            entry["va_ref"] = wp.va_ref
        doc["waypoints"].append(entry)
    doc["weights"] = {
        mode: {
            "sigma0": w.sigma0, "sigma1": w.sigma1, "sigma2": w.sigma2
        }
        for mode, w in plan.weights.items()
    }
    cs = plan.constraints
    doc["constraints"] = {
        "phi_max_deg": cs.phi_max_deg,
        "speed_slack": cs.speed_slack,
        "vz_band": cs.vz_band,
        "d_safe": cs.d_safe,
    }
    if plan.obstacles:
        doc["obstacles"] = [
            {
                "x": o.x_o, "y": o.y_o, "sigma_x": o.sigma_x,
                "sigma_y": o.sigma_y, "h": o.h, "hard": o.hard,
            }
            for o in plan.obstacles
        ]
    wind_doc: dict = {}
    if any(plan.wind.steady):
        wind_doc["steady"] = list(plan.wind.steady)
    if plan.wind.gusts:
        wind_doc["gusts"] = [
            {"amp": list(a), "freq": f, "phase": p}
            for a, f, p in plan.wind.gusts
        ]
    if plan.wind.columns:
        wind_doc["columns"] = [
            {"center": list(c), "radius": r, "w": w}
            for c, r, w in plan.wind.columns
        ]
    if plan.wind.steps:
        wind_doc["steps"] = [
            {"t0": t0, "ramp": ramp, "delta": list(d)}
            for t0, ramp, d in plan.wind.steps
        ]
    if wind_doc:
        doc["wind"] = wind_doc
    doc["replan_interval"] = plan.replan_interval
    doc["n_segments"] = plan.n_segments
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


# ----------------------------------------------------------------------
# Airframe files
# ----------------------------------------------------------------------
_AIRFRAME_REQUIRED = ("m", "S", "AR", "e", "C_D0")
_AIRFRAME_OPTIONAL = ("rho", "g")


def load_airframe(path) -> tuple[Airframe, SinkPolar | None]:
    """Airframe parameters, plus the fitted polar if the file has one.

    The file carries the physical fields of Airframe at top level and
    an optional ``polar: {P, B}`` block written by the polar fit.
    """
    src = str(path)
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise MissionParseError(f"{src}: {e.strerror}") from None
    ctx = _Ctx(src)
    try:
        root = yaml.compose(io.StringIO(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark else 0
        raise MissionParseError(f"{src}:{line}: invalid YAML: {e}") from None
    if root is None:
        raise MissionParseError(f"{src}:0: empty airframe file")
    entries = _as_map(ctx, root, "airframe")
    allowed = set(_AIRFRAME_REQUIRED) | set(_AIRFRAME_OPTIONAL) | {"polar"}
    _reject_unknown(ctx, entries, allowed, "airframe")
    kwargs = {}
    for key in _AIRFRAME_REQUIRED:
        if key not in entries:
            raise ctx.err(root, f"airframe missing field '{key}'")
        kwargs[key] = _float(ctx, entries[key][1], f"airframe.{key}")
    for key in _AIRFRAME_OPTIONAL:
        if key in entries:
            kwargs[key] = _float(ctx, entries[key][1], f"airframe.{key}")
    try:
        airframe = Airframe(**kwargs)
    except ValueError as e:
        raise ctx.err(root, str(e)) from None
    polar = None
    if "polar" in entries:
        sub = _as_map(ctx, entries["polar"][1], "airframe.polar")
        _reject_unknown(ctx, sub, {"P", "B"}, "airframe.polar")
        for key in ("P", "B"):
            if key not in sub:
                raise ctx.err(
                    entries["polar"][1], f"airframe.polar missing '{key}'"
                )
        try:
            polar = SinkPolar(
                _float(ctx, sub["P"][1], "airframe.polar.P"),
                _float(ctx, sub["B"][1], "airframe.polar.B"),
            )
        except ValueError as e:
            raise ctx.err(entries["polar"][1], str(e)) from None
    return airframe, polar


def save_airframe(
    path, airframe: Airframe, polar: SinkPolar | None = None
) -> None:
    """Write an airframe file that load_airframe reads back."""
    doc = {
        "m": airframe.m, "S": airframe.S, "AR": airframe.AR,
        "e": airframe.e, "C_D0": airframe.C_D0,
        "rho": airframe.rho, "g": airframe.g,
    }
    if polar is not None:
        doc["polar"] = {"P": polar.P, "B": polar.B}
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


# ----------------------------------------------------------------------
# Leg construction and the full pipeline
# ----------------------------------------------------------------------
def _leg_problem(
    plan: MissionPlan,
    idx: int,
    airframe: Airframe,
    polar: SinkPolar,
    prev_exit: tuple[float, np.ndarray] | None,
) -> tuple[PlanProblem, tuple[float, np.ndarray]]:
    """PlanProblem for segment idx plus its exit (heading, velocity).

    Consecutive legs chain: a leg exits aimed along the following
    segment's track at its own reference speed, and the next leg's
    plan starts from exactly that velocity with a grace window that
    lets the optimizer own the speed transition. Without the chain a
    cruise leg hands a glide leg ~6 m/s of excess speed against a
    pinned slow entry state and the tracker dives after the error.
    """
    wp0, wp1 = plan.segments[idx]
    spec = plan.constraints
    phi_max = math.radians(spec.phi_max_deg)
    wind = np.array(plan.wind.steady, dtype=float)
    track = np.array([wp1.x - wp0.x, wp1.y - wp0.y])
    track = track / max(np.linalg.norm(track), 1e-9)
    # aim the exit along the next segment's chord when one follows
    if idx + 2 < len(plan.waypoints):
        wp2 = plan.waypoints[idx + 2]
        heading_out = math.atan2(wp2.y - wp1.y, wp2.x - wp1.x)
    else:
        heading_out = math.atan2(wp1.y - wp0.y, wp1.x - wp0.x)

    start_vel = None if prev_exit is None else np.array(prev_exit[1], float)
    grace = 0.0 if prev_exit is None else 0.25

    if wp0.mode == "glide":
        start, end, vg = glide_endpoint_states(
            wp0.pos, wp1.pos, wp0.va_ref, wind, airframe, polar,
            start_vel=start_vel,
        )
        cs = default_constraints(
            wp0.va_ref, vg, start, end,
            phi_max=phi_max,
            speed_slack=spec.speed_slack,
            vz_band=spec.vz_band,
            d_safe=spec.d_safe,
            g=airframe.g,
        )
        problem = PlanProblem(
            mode="glide",
            waypoints=np.vstack([wp0.pos, wp1.pos]),
            airframe=airframe,
            polar=polar,
            wind=wind,
            obstacles=list(plan.obstacles),
            weights=plan.weights["glide"],
            constraints=cs,
            va_ref=wp0.va_ref,
            n_segments=plan.n_segments,
            grace=grace,
            speed_slack=spec.speed_slack,
        )
        # straight descending leg: exit velocity is its own end state
        heading_glide = math.atan2(wp1.y - wp0.y, wp1.x - wp0.x)
        return problem, (heading_glide, end[1].copy())

    # cruise: Dubins-seeded between poses; entry heading chains from the
    # previous leg so consecutive segments join smoothly
    h_in = (
        math.atan2(wp1.y - wp0.y, wp1.x - wp0.x)
        if prev_exit is None
        else prev_exit[0]
    )
    start_pose = Pose2D(wp0.x, wp0.y, h_in)
    end_pose = Pose2D(wp1.x, wp1.y, heading_out)
    r_min = wp0.va_ref**2 / (airframe.g * math.tan(phi_max))
    seeds = dubins_seed_waypoints(
        start_pose, end_pose, wp0.z, wp1.z, 1.4 * r_min, n=8
    )
    start, end, vg = cruise_endpoint_states(
        start_pose, end_pose, wp0.z, wp1.z, wp0.va_ref, wind
    )
    if start_vel is not None:
        start[1] = start_vel
    cs = default_constraints(
        wp0.va_ref, vg, start, end,
        phi_max=phi_max,
        speed_slack=spec.speed_slack,
        vz_band=spec.vz_band,
        d_safe=spec.d_safe,
        g=airframe.g,
    )
    problem = PlanProblem(
        mode="cruise",
        waypoints=seeds,
        airframe=airframe,
        polar=polar,
        wind=wind,
        obstacles=list(plan.obstacles),
        weights=plan.weights["cruise"],
        constraints=cs,
        va_ref=wp0.va_ref,
        grace=grace,
        speed_slack=spec.speed_slack,
    )
    return problem, (heading_out, end[1].copy())


def build_legs(
    plan: MissionPlan,
    airframe: Airframe,
    polar: SinkPolar,
    solve_opts=None,
) -> list:
    """Plan every mission segment; returns simulator-ready legs."""
    legs = []
    prev_exit = None
    for idx in range(len(plan.segments)):
        problem, prev_exit = _leg_problem(
            plan, idx, airframe, polar, prev_exit
        )
        if problem.mode == "glide":
            traj, report, mult = plan_glide(problem, solve_opts)
        else:
            traj, report, mult = plan_cruise(problem, solve_opts)
        legs.append(
            SimpleLeg(
                problem=problem, trajectory=traj,
                multipliers=mult, report=report,
            )
        )
    return legs


def run_mission(
    plan: MissionPlan,
    airframe: Airframe,
    polar: SinkPolar,
    sensors: SensorModel | None = None,
    opts: SimOptions | None = None,
    solve_opts=None,
) -> tuple[SimLog, Metrics]:
    """Plan all segments, fly them closed-loop, and score the result."""
    if opts is None:
        opts = SimOptions(replan_interval=plan.replan_interval)
    legs = build_legs(plan, airframe, polar, solve_opts)
    log = run_closed_loop(legs, airframe, polar, plan.wind, sensors, opts)
    metrics = compute_metrics(log, plan, airframe, polar)
    return log, metrics


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------
def _glide_runs(mode_col) -> list:
    """Contiguous [i0, i1) index runs of glide-mode rows."""
    runs = []
    start = None
    for i, m in enumerate(mode_col):
        if m == "glide" and start is None:
            start = i
        elif m != "glide" and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mode_col)))
    return runs


def compute_metrics(
    log: SimLog,
    plan: MissionPlan,
    airframe: Airframe,
    polar: SinkPolar,
) -> Metrics:
    """Score a log against its mission over glide-mode rows.

    Airspeed error is taken against the glide segment's va_ref,
    matching contiguous glide runs to the mission's glide segments in
    order; sink error against the polar at the flown airspeed and bank;
    netto against zero. Distances are horizontal path length.
    """
    runs = _glide_runs(log.mode)
    if not runs:
        raise MetricsError("log contains no glide-mode rows")
    glide_refs = [
        wp.va_ref for wp, _ in plan.segments if wp.mode == "glide"
    ]
    if len(runs) > len(glide_refs) and glide_refs:
        # replans or leg splits cannot create runs, but guard anyway:
        # reuse the last reference for any excess runs
        glide_refs = glide_refs + [glide_refs[-1]] * (
            len(runs) - len(glide_refs)
        )
    if not glide_refs:
        raise MetricsError("mission has no glide segments")

    sq_va, sq_vz, sq_en, n_rows = 0.0, 0.0, 0.0, 0
    dist, loss = 0.0, 0.0
    for (i0, i1), va_ref in zip(runs, glide_refs):
        va = log.va[i0:i1]
        vz = log.vz[i0:i1]
        phi = log.phi[i0:i1]
        enet = log.enet[i0:i1]
        vz_ref = np.array(
            [sink_rate(polar, airframe, v, p) for v, p in zip(va, phi)]
        )
        sq_va += float(np.sum((va - va_ref) ** 2))
        sq_vz += float(np.sum((vz - vz_ref) ** 2))
        sq_en += float(np.sum(enet**2))
        n_rows += i1 - i0
        dist += float(
            np.sum(np.hypot(np.diff(log.x[i0:i1]), np.diff(log.y[i0:i1])))
        )
        loss += float(log.z[i0] - log.z[i1 - 1])

    clearance = math.inf
    for obs in plan.obstacles:
        d = np.hypot(log.x - obs.x_o, log.y - obs.y_o)
        clearance = min(clearance, float(np.min(d)))

    return Metrics(
        rmse_va=math.sqrt(sq_va / n_rows),
        rmse_vz=math.sqrt(sq_vz / n_rows),
        rmse_enet=math.sqrt(sq_en / n_rows),
        glide_distance_m=dist,
        altitude_loss_m=loss,
        glide_ratio=dist / loss if loss > 0.0 else math.inf,
        min_obstacle_clearance_m=clearance,
    )


# ----------------------------------------------------------------------
# Plot-data emission (data tables only, no rendering)
# ----------------------------------------------------------------------
def emit_plot_data(log: SimLog, plan: MissionPlan) -> dict:
    """CSV text per figure analog, keyed by file stem.

    glide_profile: altitude against along-track distance;
    speed_traces: airspeed and ground speed over time;
    netto_trace: estimated netto rate over time;
    track2d: ground track plus obstacle contour rings at 1 and 2 sigma.
    """
    out = {}
    along = np.concatenate(
        ([0.0], np.cumsum(np.hypot(np.diff(log.x), np.diff(log.y))))
    )
    rows = "\n".join(
        f"{s:.3f},{z:.3f}" for s, z in zip(along, log.z)
    )
    out["glide_profile"] = "along_track_m,altitude_m\n" + rows + "\n"

    rows = "\n".join(
        f"{t:.3f},{va:.4f},{vg:.4f}"
        for t, va, vg in zip(log.t, log.va, log.vg)
    )
    out["speed_traces"] = "t_s,va_mps,vg_mps\n" + rows + "\n"

    rows = "\n".join(
        f"{t:.3f},{e:.4f}" for t, e in zip(log.t, log.enet)
    )
    out["netto_trace"] = "t_s,enet_mps\n" + rows + "\n"

    lines = ["x_m,y_m,series"]
    lines += [f"{x:.3f},{y:.3f},track" for x, y in zip(log.x, log.y)]
    ang = np.linspace(0.0, 2.0 * math.pi, 73)
    for i, obs in enumerate(plan.obstacles):
        for k in (1.0, 2.0):
            xs = obs.x_o + k * obs.sigma_x * np.cos(ang)
            ys = obs.y_o + k * obs.sigma_y * np.sin(ang)
            lines += [
                f"{x:.3f},{y:.3f},obstacle{i}_{int(k)}sigma"
                for x, y in zip(xs, ys)
            ]
    out["track2d"] = "\n".join(lines) + "\n"
    return out
