"""Point-mass closed-loop flight simulator with wind and sensor models.

The plant is a six-state air-relative point mass: position, airspeed,
air-relative flight-path and heading angles, plus bank and pitch that
track their commands through first-order lags. Lift follows from the
realized pitch through a linear lift curve, so flight-path dynamics
respond to pitch the way the trim analysis assumes; drag comes from the
airframe's parasitic + induced model. Inertial velocity is air-relative
velocity plus the local wind, which keeps the model Galilean-invariant
under steady wind.

The closed loop couples this plant to the planner stack: a flat-output
jerk PID integrates into a commanded acceleration, the flat map turns
that into bank/pitch/thrust, and the planner replans at a fixed
interval from the current flight state. A netto-variometer pipeline
runs alongside on noisy sensor samples at their own rates.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .aero import (
    Airframe,
    EnergySample,
    SinkPolar,
    StreamingDerivative,
    energy_rate,
    lift_slope,
    sink_rate,
)
from .bernstein import CompositeTrajectory
from .flatness import AttitudeCommand, FlatState, PidGains, flat_to_commands, track_pid
from .planner import PlanProblem, plan_glide, replan

__all__ = [
    "SimState",
    "WindField",
    "SensorModel",
    "SimOptions",
    "SimLog",
    "NettoPipeline",
    "wind_at",
    "step",
    "trim_thrust",
    "trim_glide",
    "run_closed_loop",
    "SIMLOG_HEADER",
]

SIMLOG_HEADER = "t,x,y,z,va,vg,vz,enet,phi,theta,psi,thrust,mode,replan"

# thrust normalization shared with the flat map: u = 1 is this fraction
# of the vehicle weight
THRUST_WEIGHT_FRACTION = 0.6


@dataclass
class SimState:
    """Inertial flight state; angles in radians, z up."""

    x: np.ndarray
    v: np.ndarray
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.x.shape != (3,) or self.v.shape != (3,):
            raise ValueError("position and velocity must be 3-vectors")
        if not (
            np.all(np.isfinite(self.x))
            and np.all(np.isfinite(self.v))
            and all(
                math.isfinite(a) for a in (self.phi, self.theta, self.psi)
            )
        ):
            raise ValueError("simulator state must be finite")
        self.phi = _wrap_pi(self.phi)
        self.theta = _wrap_pi(self.theta)
        self.psi = _wrap_pi(self.psi)


def _wrap_pi(a: float) -> float:
    return float((a + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass(frozen=True)
class WindField:
    """Steady wind plus gust sinusoids, updraft columns and ramp steps.

    gusts: (amplitude 3-vector m/s, frequency Hz, phase rad) per entry.
    columns: (center xy, radius m, vertical speed m/s); full strength
    inside half the radius, cosine-tapered to zero at the rim.
    steps: (t0 s, ramp s, delta 3-vector m/s); the steady wind gains
    delta through a smoothstep ramp starting at t0. A true discontinuity
    would break the integrator's convergence order, so ramps are the
    primitive and a short ramp stands in for a step.
    """

    steady: tuple = (0.0, 0.0, 0.0)
    gusts: tuple = ()
    columns: tuple = ()
    steps: tuple = ()

    def __post_init__(self):
        steady = np.asarray(self.steady, dtype=float)
        if steady.shape != (3,):
            raise ValueError("steady wind must be a 3-vector")
        object.__setattr__(self, "steady", tuple(float(s) for s in steady))
        for amp, freq, _phase in self.gusts:
            if np.asarray(amp, dtype=float).shape != (3,):
                raise ValueError("gust amplitude must be a 3-vector")
            if freq <= 0.0:
                raise ValueError(f"gust frequency {freq} must be positive")
        for _center, radius, _w in self.columns:
            if radius <= 0.0:
                raise ValueError(f"column radius {radius} must be positive")
        for _t0, ramp, delta in self.steps:
            if ramp <= 0.0:
                raise ValueError(f"step ramp {ramp} must be positive")
            if np.asarray(delta, dtype=float).shape != (3,):
                raise ValueError("step delta must be a 3-vector")


def wind_at(field: WindField, t: float, pos) -> np.ndarray:
    """Wind vector at time t and position pos (m/s, z up)."""
    pos = np.asarray(pos, dtype=float)
    w = np.array(field.steady, dtype=float)
    for amp, freq, phase in field.gusts:
        w = w + np.asarray(amp, float) * math.sin(
            2.0 * math.pi * freq * t + phase
        )
    for center, radius, w_z in field.columns:
        cx, cy = float(center[0]), float(center[1])
        r = math.hypot(pos[0] - cx, pos[1] - cy) / radius
        if r < 0.5:
            w[2] += w_z
        elif r < 1.0:
            w[2] += w_z * 0.5 * (1.0 + math.cos(math.pi * (r - 0.5) / 0.5))
    for t0, ramp, delta in field.steps:
        s = (t - t0) / ramp
        if s >= 1.0:
            w = w + np.asarray(delta, float)
        elif s > 0.0:
            w = w + np.asarray(delta, float) * (s * s * (3.0 - 2.0 * s))
    return w


@dataclass(frozen=True)
class SensorModel:
    """Additive Gaussian sensor noise with zero-order hold.

    Airspeed and position channels sample at their own rates; the seed
    fixes the whole noise realization.
    """

    va_sigma: float = 0.3
    va_rate: float = 20.0
    pos_sigma: float = 0.5
    pos_rate: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.va_sigma < 0.0 or self.pos_sigma < 0.0:
            raise ValueError("noise sigmas must be nonnegative")
        if self.va_rate <= 0.0 or self.pos_rate <= 0.0:
            raise ValueError("sample rates must be positive")


# ----------------------------------------------------------------------
# Plant model
# ----------------------------------------------------------------------
def _air_state(state: SimState, wind: np.ndarray):
    """(va, gamma, psi_air) of the air-relative velocity."""
    v_air = state.v - wind
    va = float(np.linalg.norm(v_air))
    if va < 1e-6:
        raise ValueError("airspeed vanished; air-relative state undefined")
    gamma = math.asin(max(-1.0, min(1.0, v_air[2] / va)))
    psi = math.atan2(v_air[1], v_air[0])
    return va, gamma, psi


# realized angle of attack is clamped to the linear-lift range
ALPHA_MAX = 0.35


def _derivatives(
    y: np.ndarray,
    t: float,
    cmd: AttitudeCommand,
    wind_field: WindField,
    af: Airframe,
    tau_phi: float,
    tau_theta: float,
):
    """Right-hand side of the point-mass model.

    y = [x, y, z, va, gamma, psi, phi, theta].
    """
    pos = y[0:3]
    va = max(float(y[3]), 1.0)
    gamma, psi, phi, theta = y[4], y[5], y[6], y[7]

    w = wind_at(wind_field, t, pos)
    cg, sg = math.cos(gamma), math.sin(gamma)
    v_air = va * np.array([cg * math.cos(psi), cg * math.sin(psi), sg])

    alpha = max(-ALPHA_MAX, min(ALPHA_MAX, theta - gamma))
    cl = lift_slope(af) * alpha
    q = 0.5 * af.rho * va * va * af.S
    lift = q * cl
    drag = q * (af.C_D0 + af.k_induced * cl * cl)
    thrust = cmd.thrust * THRUST_WEIGHT_FRACTION * af.m * af.g

    va_dot = (thrust - drag) / af.m - af.g * sg
    gamma_dot = (lift * math.cos(phi) - af.m * af.g * cg) / (af.m * va)
    psi_dot = lift * math.sin(phi) / (af.m * va * max(cg, 0.2))

    dy = np.empty(8)
    dy[0:3] = v_air + w
    dy[3] = va_dot
    dy[4] = gamma_dot
    dy[5] = psi_dot
    dy[6] = (cmd.phi_c - phi) / tau_phi
    dy[7] = (cmd.theta_c - theta) / tau_theta
    return dy


def step(
    state: SimState,
    cmd: AttitudeCommand,
    wind: WindField,
    airframe: Airframe,
    polar: SinkPolar,
    dt: float,
    *,
    tau_phi: float = 0.3,
    tau_theta: float = 0.25,
) -> SimState:
    """One RK4 step of the point-mass model with the command held.

    The polar argument is accepted for interface symmetry with the rest
    of the stack; the plant flies the airframe's physical drag model,
    and the fitted polar belongs to the planner and variometer side.
    """
    del polar
    if not 0.0 < dt <= 0.05:
        raise ValueError(f"dt={dt} outside (0, 0.05]")
    w0 = wind_at(wind, state.t, state.x)
    va, gamma, psi = _air_state(state, w0)
    y = np.array([
        state.x[0], state.x[1], state.x[2],
        va, gamma, psi, state.phi, state.theta,
    ])

    args = (cmd, wind, airframe, tau_phi, tau_theta)
    k1 = _derivatives(y, state.t, *args)
    k2 = _derivatives(y + 0.5 * dt * k1, state.t + 0.5 * dt, *args)
    k3 = _derivatives(y + 0.5 * dt * k2, state.t + 0.5 * dt, *args)
    k4 = _derivatives(y + dt * k3, state.t + dt, *args)
    y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise FloatingPointError("point-mass integration diverged")

    t_new = state.t + dt
    pos_new = y_new[0:3]
    va_n, gam_n, psi_n = y_new[3], y_new[4], y_new[5]
    cgn = math.cos(gam_n)
    v_air_n = va_n * np.array([
        cgn * math.cos(psi_n), cgn * math.sin(psi_n), math.sin(gam_n)
    ])
    v_new = v_air_n + wind_at(wind, t_new, pos_new)
    return SimState(
        x=pos_new,
        v=v_new,
        phi=float(y_new[6]),
        theta=float(y_new[7]),
        psi=float(psi_n),
        t=t_new,
    )


# ----------------------------------------------------------------------
# Trim helpers
# ----------------------------------------------------------------------
def trim_thrust(airframe: Airframe, va: float) -> float:
    """Thrust fraction holding level flight at airspeed va."""
    if va <= 0.0:
        raise ValueError("airspeed must be positive")
    cl = airframe.lift_coefficient(va)
    q = 0.5 * airframe.rho * va * va * airframe.S
    drag = q * (airframe.C_D0 + airframe.k_induced * cl * cl)
    return float(drag / (THRUST_WEIGHT_FRACTION * airframe.m * airframe.g))


def trim_glide(airframe: Airframe, va: float) -> tuple[float, float, float]:
    """(gamma, alpha, theta) of the zero-thrust steady glide at va.

    Fixed-point iteration of the lift/drag balance; gamma < 0.
    """
    if va <= 0.0:
        raise ValueError("airspeed must be positive")
    g = airframe.g
    q = 0.5 * airframe.rho * va * va * airframe.S
    gamma = 0.0
    for _ in range(50):
        cl = airframe.m * g * math.cos(gamma) / q
        drag = q * (airframe.C_D0 + airframe.k_induced * cl * cl)
        gamma_new = -math.asin(min(1.0, drag / (airframe.m * g)))
        if abs(gamma_new - gamma) < 1e-12:
            gamma = gamma_new
            break
        gamma = gamma_new
    cl = airframe.m * g * math.cos(gamma) / q
    alpha = cl / lift_slope(airframe)
    return gamma, alpha, gamma + alpha


# ----------------------------------------------------------------------
# Netto-variometer pipeline
# ----------------------------------------------------------------------
class NettoPipeline:
    """Onboard airmass-motion estimate from noisy sensor streams.

    The airspeed channel is Savitzky-Golay differentiated at its sample
    rate; the altitude channel likewise at the (slower) position rate.
    Each derivative refers to the center of its window, so estimates
    are re-aligned to the altitude channel's center time before the
    energy-rate sum; the published value therefore lags flight time by
    half the altitude window.

    Both channels fit quadratics: a cubic's derivative filter amplifies
    white sensor noise about 2.6x more for no benefit at vario
    bandwidths.
    """

    def __init__(
        self,
        polar: SinkPolar,
        airframe: Airframe,
        va_rate: float,
        pos_rate: float,
        window_va: int = 15,
        window_z: int = 15,
        order: int = 2,
    ):
        self.polar = polar
        self.airframe = airframe
        self._sd_va = StreamingDerivative(1.0 / va_rate, window_va, order)
        self._sd_z = StreamingDerivative(1.0 / pos_rate, window_z, order)
        self._raw: list[tuple[float, float, float]] = []
        self._va_hist: list[tuple[float, float, float, float]] = []
        self.value: float | None = None
        self.delay = self._sd_z.delay

    def push_va(self, t: float, va_meas: float, phi: float):
        self._raw.append((t, va_meas, phi))
        if len(self._raw) > 512:
            del self._raw[:256]
        va_dot = self._sd_va.push(va_meas)
        if va_dot is None:
            return
        # the derivative refers to the sample at the window center
        tc, va_c, phi_c = self._raw[-1 - self._sd_va.window // 2]
        self._va_hist.append((tc, va_c, va_dot, phi_c))
        if len(self._va_hist) > 512:
            del self._va_hist[:256]

    def push_z(self, t: float, z_meas: float):
        z_dot = self._sd_z.push(z_meas)
        if z_dot is None or not self._va_hist:
            return
        t_center = t - self._sd_z.delay
        # nearest airspeed-channel estimate to the altitude center time
        times = np.array([h[0] for h in self._va_hist])
        k = int(np.argmin(np.abs(times - t_center)))
        _tc, va_c, va_dot_c, phi_c = self._va_hist[k]
        va_c = max(va_c, 1.0)
        sample = EnergySample(
            t=t_center, xz_dot=z_dot, va=va_c, va_dot=va_dot_c, phi=phi_c
        )
        self.value = energy_rate(sample, self.airframe.g) + sink_rate(
            self.polar, self.airframe, va_c, phi_c
        )


# ----------------------------------------------------------------------
# Closed loop
# ----------------------------------------------------------------------
@dataclass
class SimOptions:
    """Closed-loop run configuration."""

    dt: float = 0.01
    replan_interval: float = 1.0
    tau_phi: float = 0.3
    tau_theta: float = 0.25
    gains: PidGains = field(default_factory=PidGains)
    max_leg_time: float = 300.0
    arrival_radius: float = 15.0
    divergence_limit: float = 200.0
    # bias added to the wind fed to the planner, leaving the plant's
    # wind untouched; models an imperfect onboard wind estimate
    planner_wind_bias: tuple = (0.0, 0.0, 0.0)
    replan_enabled: bool = True


@dataclass
class SimLog:
    """Uniform-rate closed-loop log; one row per control step."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    va: np.ndarray
    vg: np.ndarray
    vz: np.ndarray
    enet: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    thrust: np.ndarray
    mode: np.ndarray
    replan: np.ndarray
    tracking_failure: bool = False

    def __len__(self) -> int:
        return int(self.t.size)

    def to_csv(self, path_or_buf) -> None:
        """Write the exact closed-loop CSV schema."""
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            f = open(path_or_buf, "w", encoding="utf-8")
            close = True
        else:
            f = path_or_buf
        try:
            f.write(SIMLOG_HEADER + "\n")
            for i in range(len(self)):
                f.write(
                    f"{self.t[i]:.4f},{self.x[i]:.6f},{self.y[i]:.6f},"
                    f"{self.z[i]:.6f},{self.va[i]:.6f},{self.vg[i]:.6f},"
                    f"{self.vz[i]:.6f},{self.enet[i]:.6f},{self.phi[i]:.6f},"
                    f"{self.theta[i]:.6f},{self.psi[i]:.6f},"
                    f"{self.thrust[i]:.6f},{self.mode[i]},"
                    f"{int(self.replan[i])}\n"
                )
        finally:
            if close:
                f.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "SimLog":
        if isinstance(path_or_buf, (str, bytes)):
            with open(path_or_buf, encoding="utf-8") as f:
                text = f.read()
        else:
            text = path_or_buf.read()
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0].strip() != SIMLOG_HEADER:
            raise ValueError(
                f"bad SimLog header: expected {SIMLOG_HEADER!r}"
            )
        cols = list(zip(*(ln.split(",") for ln in lines[1:])))
        if len(cols) != 14:
            raise ValueError("SimLog rows must have 14 columns")
        nums = [np.array([float(v) for v in c]) for c in cols[:12]]
        mode = np.array([str(v) for v in cols[12]])
        rep = np.array([int(v) for v in cols[13]])
        log = cls(*nums, mode, rep)
        if np.any(np.diff(log.t) <= 0):
            raise ValueError("SimLog time must be strictly increasing")
        return log

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


class _LogBuilder:
    def __init__(self):
        self.rows = {k: [] for k in SIMLOG_HEADER.split(",")}

    def add(self, state: SimState, wind_now, enet, thrust, mode, replanned):
        r = self.rows
        v_air = state.v - wind_now
        r["t"].append(state.t)
        r["x"].append(state.x[0])
        r["y"].append(state.x[1])
        r["z"].append(state.x[2])
        r["va"].append(float(np.linalg.norm(v_air)))
        r["vg"].append(float(np.hypot(state.v[0], state.v[1])))
        r["vz"].append(float(-state.v[2]))
        r["enet"].append(enet)
        r["phi"].append(state.phi)
        r["theta"].append(state.theta)
        r["psi"].append(state.psi)
        r["thrust"].append(thrust)
        r["mode"].append(mode)
        r["replan"].append(1 if replanned else 0)

    def build(self, failure: bool) -> SimLog:
        r = self.rows
        return SimLog(
            t=np.array(r["t"]),
            x=np.array(r["x"]),
            y=np.array(r["y"]),
            z=np.array(r["z"]),
            va=np.array(r["va"]),
            vg=np.array(r["vg"]),
            vz=np.array(r["vz"]),
            enet=np.array(r["enet"]),
            phi=np.array(r["phi"]),
            theta=np.array(r["theta"]),
            psi=np.array(r["psi"]),
            thrust=np.array(r["thrust"]),
            mode=np.array(r["mode"]),
            replan=np.array(r["replan"], dtype=int),
            tracking_failure=failure,
        )


def _traj_flat_state(traj: CompositeTrajectory, t: float) -> FlatState:
    tc = min(max(t, traj.t0), traj.tf)
    return FlatState(
        traj.eval(tc),
        traj.eval(tc, 1),
        traj.eval(tc, 2),
        traj.eval(tc, 3),
    )


def run_closed_loop(
    mission,
    airframe: Airframe,
    polar: SinkPolar,
    wind: WindField,
    sensors: SensorModel | None = None,
    opts: SimOptions | None = None,
) -> SimLog:
    """Fly a mission's legs closed-loop and log every control step.

    ``mission`` provides ``legs``: each leg carries a ready PlanProblem
    (``problem``) or enough fields to build one, plus its mode. Glide
    legs replan at the configured interval; the netto pipeline runs
    from noisy sensors throughout.
    """
    if sensors is None:
        sensors = SensorModel()
    if opts is None:
        opts = SimOptions()
    legs = mission.legs if hasattr(mission, "legs") else list(mission)
    if not legs:
        raise ValueError("mission has no legs")

    dt = opts.dt
    rng = np.random.default_rng(sensors.seed)
    va_every = max(1, round(1.0 / (sensors.va_rate * dt)))
    pos_every = max(1, round(1.0 / (sensors.pos_rate * dt)))
    pipeline = NettoPipeline(
        polar, airframe, sensors.va_rate, sensors.pos_rate
    )
    bias = np.asarray(opts.planner_wind_bias, dtype=float)

    log = _LogBuilder()
    failure = False
    state: SimState | None = None
    t = 0.0

    for leg in legs:
        problem: PlanProblem = leg.problem
        mode = problem.mode
        traj = leg.trajectory
        if traj is None:
            raise ValueError("legs must be planned before simulation")
        t0_leg = t
        # each leg's trajectory runs on its own clock; replans stay on
        # that clock because they anchor at the leg-relative time
        t_off = t - traj.t0
        tl = traj.t0

        ref0 = _traj_flat_state(traj, tl)
        if state is None:
            state = SimState(
                x=ref0.x.copy(), v=ref0.x_dot.copy(), t=0.0
            )
            w_now = wind_at(wind, 0.0, state.x)
            va0, gamma0, psi0 = _air_state(state, w_now)
            _g, _a, theta0 = trim_glide(airframe, va0)
            state.phi = 0.0
            state.theta = theta0 if mode == "glide" else _a
            state.psi = psi0
        a_cmd = ref0.x_ddot.copy()
        a_est = ref0.x_ddot.copy()
        v_prev = state.v.copy()
        next_replan = tl + opts.replan_interval
        step_idx = 0
        end_xy = np.asarray(problem.waypoints[-1][:2], dtype=float)
        warm = leg.multipliers

        while True:
            w_now = wind_at(wind, t, state.x)

            # sensor ticks and the variometer pipeline
            v_air = state.v - w_now
            va_true = float(np.linalg.norm(v_air))
            if step_idx % va_every == 0:
                va_meas = va_true + sensors.va_sigma * rng.standard_normal()
                pipeline.push_va(t, va_meas, state.phi)
            if step_idx % pos_every == 0:
                z_meas = (
                    state.x[2] + sensors.pos_sigma * rng.standard_normal()
                )
                pipeline.push_z(t, z_meas)

            # replanning (glide legs only: thrust authority makes cruise
            # tracking self-correcting, and the glide replanner owns the
            # free-altitude endpoint logic)
            replanned = False
            if (
                opts.replan_enabled
                and mode == "glide"
                and tl >= next_replan
                and tl < traj.tf - 1.0
            ):
                # start acceleration from the plant, not the tracking
                # integrator: the controller state carries correction
                # authority that would poison the pinned start state
                est = FlatState(
                    state.x.copy(), state.v.copy(), a_est.copy(),
                    np.zeros(3),
                )
                wind_est = w_now + bias
                traj_new, rep, warm = replan(
                    est, problem, wind_est, traj, tl, warm=warm
                )
                replanned = rep.converged and traj_new is not traj
                traj = traj_new
                if replanned:
                    # the deadband in replan compares against the wind
                    # the active plan was built with
                    problem = replace(problem, wind=wind_est)
                next_replan = tl + opts.replan_interval

            # flat-output tracking cascade
            ref = _traj_flat_state(traj, tl)
            meas = FlatState(state.x, state.v, a_cmd, np.zeros(3))
            jerk_cmd = track_pid(ref, meas, opts.gains)
            a_cmd = a_cmd + jerk_cmd * dt
            a_lim = airframe.g * 1.2
            a_cmd = np.clip(a_cmd, -a_lim, a_lim)
            cmd = flat_to_commands(
                FlatState(state.x, state.v, a_cmd, jerk_cmd),
                w_now,
                airframe,
                mode=mode,
            )

            enet = pipeline.value if pipeline.value is not None else 0.0
            log.add(state, w_now, enet, cmd.thrust, mode, replanned)

            pos_err = float(np.linalg.norm(state.x - ref.x))
            if pos_err > opts.divergence_limit:
                failure = True
                break

            v_prev = state.v
            state = step(
                state, cmd, wind, airframe, polar, dt,
                tau_phi=opts.tau_phi, tau_theta=opts.tau_theta,
            )
            a_est = (state.v - v_prev) / dt
            t = state.t
            tl = t - t_off
            step_idx += 1

            dist_end = float(np.linalg.norm(state.x[:2] - end_xy))
            if tl >= traj.tf and dist_end <= opts.arrival_radius:
                break
            if tl >= traj.tf + 10.0:
                break
            if t - t0_leg > opts.max_leg_time:
                failure = True
                break
        if failure:
            break

    return log.build(failure)


def run_trim_glide(
    airframe: Airframe,
    polar: SinkPolar,
    wind: WindField,
    va_ref: float,
    duration: float,
    *,
    x0=(0.0, 0.0, 120.0),
    psi0: float = 0.0,
    sensors: SensorModel | None = None,
    opts: SimOptions | None = None,
) -> SimLog:
    """Free glide under a speed-hold pitch loop, wings level, no thrust.

    The aircraft rides the airmass instead of chasing a position
    reference, so vertical air motion passes straight into the climb
    rate and the netto estimate reads it directly. A position tracker
    would instead convert updraft energy into airspeed and mask the
    signal; this mode is the honest validation setting for the
    variometer pipeline.
    """
    if va_ref <= 0.0 or duration <= 0.0:
        raise ValueError("va_ref and duration must be positive")
    if sensors is None:
        sensors = SensorModel()
    if opts is None:
        opts = SimOptions()
    dt = opts.dt
    rng = np.random.default_rng(sensors.seed)
    va_every = max(1, round(1.0 / (sensors.va_rate * dt)))
    pos_every = max(1, round(1.0 / (sensors.pos_rate * dt)))
    pipeline = NettoPipeline(
        polar, airframe, sensors.va_rate, sensors.pos_rate
    )

    gamma0, _alpha0, theta0 = trim_glide(airframe, va_ref)
    x0 = np.asarray(x0, dtype=float)
    w0 = wind_at(wind, 0.0, x0)
    v_air0 = va_ref * np.array(
        [
            math.cos(gamma0) * math.cos(psi0),
            math.cos(gamma0) * math.sin(psi0),
            math.sin(gamma0),
        ]
    )
    state = SimState(x=x0, v=v_air0 + w0, theta=theta0, psi=psi0)

    # pitch-to-speed: too fast -> nose up; integral trims the residual
    kp, ki = 0.04, 0.015
    ierr = 0.0
    log = _LogBuilder()
    step_idx = 0
    while state.t < duration:
        w_now = wind_at(wind, state.t, state.x)
        va = float(np.linalg.norm(state.v - w_now))
        if step_idx % va_every == 0:
            va_meas = va + sensors.va_sigma * rng.standard_normal()
            pipeline.push_va(state.t, va_meas, state.phi)
        if step_idx % pos_every == 0:
            z_meas = state.x[2] + sensors.pos_sigma * rng.standard_normal()
            pipeline.push_z(state.t, z_meas)

        err = va - va_ref
        ierr = float(np.clip(ierr + err * dt, -8.0, 8.0))
        theta_c = theta0 + kp * err + ki * ierr
        cmd = AttitudeCommand(
            theta_c=theta_c, phi_c=0.0, psi_c=psi0,
            omega_v=np.zeros(3), thrust=0.0,
        )
        enet = pipeline.value if pipeline.value is not None else 0.0
        log.add(state, w_now, enet, 0.0, "glide", False)
        state = step(
            state, cmd, wind, airframe, polar, dt,
            tau_phi=opts.tau_phi, tau_theta=opts.tau_theta,
        )
        step_idx += 1
    return log.build(False)


@dataclass
class SimpleLeg:
    """Minimal planned leg for direct simulator use."""

    problem: PlanProblem
    trajectory: CompositeTrajectory
    multipliers: object = None
    report: object = None


def glide_leg(problem: PlanProblem, opts=None) -> SimpleLeg:
    """Plan a glide problem and wrap it as a simulatable leg."""
    traj, _report, mult = plan_glide(problem, opts)
    return SimpleLeg(problem=problem, trajectory=traj, multipliers=mult)
