"""Differentially flat command extraction and reference reparameterization.

The planner hands over a C^3 position trajectory; everything the inner
autopilot loops need (bank, pitch, heading, thrust fraction) follows
from the flat output and its derivatives under the coordinated-flight
assumption. The third derivative is the tracking input: a PID on the
flat output error augments the feedforward jerk, giving error dynamics
e''' + k2 e'' + k1 e' + k0 e = 0 with designer-chosen Hurwitz gains.

To avoid flying the optimizer's internal timing (which may imply thrust
excursions), the trajectory is re-flown by arc length: a sampler maps
wall time to path position at the ground speed implied by the reference
airspeed and the wind triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .aero import Airframe, lift_slope
from .bernstein import CompositeTrajectory

__all__ = [
    "FlatState",
    "AttitudeCommand",
    "PidGains",
    "track_pid",
    "flat_to_commands",
    "wind_triangle",
    "arc_length_param",
    "ArcLengthSampler",
    "EPS_AIRSPEED",
]

EPS_AIRSPEED = 0.5  # m/s; below this the flat map is singular


@dataclass
class FlatState:
    """Flat output (position) and its first three time derivatives."""

    x: np.ndarray
    x_dot: np.ndarray
    x_ddot: np.ndarray
    x_dddot: np.ndarray

    def __post_init__(self):
        for name in ("x", "x_dot", "x_ddot", "x_dddot"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            setattr(self, name, arr)

    @classmethod
    def zero(cls) -> "FlatState":
        z = np.zeros(3)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())


@dataclass
class AttitudeCommand:
    """Inner-loop setpoints produced by the flat map."""

    theta_c: float
    phi_c: float
    psi_c: float
    omega_v: np.ndarray
    thrust: float

    def __post_init__(self):
        self.omega_v = np.asarray(self.omega_v, dtype=float)
        if self.omega_v.shape != (3,):
            raise ValueError("omega_v must be a 3-vector")
        if not 0.0 <= self.thrust <= 1.0:
            raise ValueError("thrust must lie in [0, 1]")


@dataclass(frozen=True)
class PidGains:
    """Gains of the third-order tracking law; must be Hurwitz.

    Stability of s^3 + k2 s^2 + k1 s + k0 requires all gains positive
    and k1 k2 > k0 (Routh-Hurwitz).
    """

    k0: float = 8.0
    k1: float = 12.0
    k2: float = 6.0

    def __post_init__(self):
        if min(self.k0, self.k1, self.k2) <= 0.0:
            raise ValueError("PID gains must be positive")
        if self.k1 * self.k2 <= self.k0:
            raise ValueError(
                f"gains k0={self.k0}, k1={self.k1}, k2={self.k2} fail "
                "the Routh-Hurwitz condition k1*k2 > k0"
            )


def track_pid(
    ref: FlatState, meas: FlatState, gains: PidGains = PidGains()
) -> np.ndarray:
    """Commanded jerk: reference jerk plus PID on the flat-output error."""
    e = ref.x - meas.x
    e_dot = ref.x_dot - meas.x_dot
    e_ddot = ref.x_ddot - meas.x_ddot
    return (
        ref.x_dddot
        + gains.k2 * e_ddot
        + gains.k1 * e_dot
        + gains.k0 * e
    )


def wind_triangle(v_ground: np.ndarray, wind: np.ndarray) -> np.ndarray:
    """Air-relative velocity V_a = V_g - W."""
    return np.asarray(v_ground, dtype=float) - np.asarray(wind, dtype=float)


# ----------------------------------------------------------------------
def flat_to_commands(
    state: FlatState,
    wind: np.ndarray,
    airframe: Airframe,
    *,
    mode: str = "cruise",
    thrust_max: float | None = None,
    phi_max: float = math.radians(45.0),
) -> AttitudeCommand:
    """Coordinated-flight attitude and thrust from a flat state.

    Heading follows the air-relative velocity azimuth; bank balances the
    lateral acceleration demand (tan phi = a_lat / (g cos gamma)); pitch
    is the air-relative climb angle plus the trim incidence; thrust
    covers drag, the along-path weight component and the axial
    acceleration, normalized by thrust_max and clamped to [0, 1]. Glide
    mode forces zero thrust.

    Raises ValueError when the airspeed falls below EPS_AIRSPEED, where
    the flat map loses rank.
    """
    if mode not in ("cruise", "glide"):
        raise ValueError(f"unknown mode {mode!r}")
    wind = np.asarray(wind, dtype=float)
    v_air = wind_triangle(state.x_dot, wind)
    va = float(np.linalg.norm(v_air))
    if va < EPS_AIRSPEED:
        raise ValueError(
            f"airspeed {va:.3f} m/s below {EPS_AIRSPEED} m/s: "
            "flat map is singular"
        )
    g = airframe.g
    psi = math.atan2(v_air[1], v_air[0])
    gamma = math.asin(np.clip(v_air[2] / va, -1.0, 1.0))
    cg, sg = math.cos(gamma), math.sin(gamma)

    # air-relative path frame: along, horizontal-left, and the in-plane
    # normal completing it
    t_hat = v_air / va
    n_hat = np.array([-math.sin(psi), math.cos(psi), 0.0])
    k_hat = np.array(
        [-sg * math.cos(psi), -sg * math.sin(psi), cg]
    )

    acc = state.x_ddot
    a_t = float(acc @ t_hat)
    a_n = float(acc @ n_hat)
    a_k = float(acc @ k_hat)
    gamma_dot = a_k / va
    psi_dot = a_n / (va * max(cg, 0.2))

    # lift vector realizing the two normal-channel accelerations; its
    # tilt is the bank, its magnitude sets the angle of attack
    l_sin = airframe.m * va * cg * psi_dot
    l_cos = airframe.m * (va * gamma_dot + g * cg)
    phi = math.atan2(l_sin, max(l_cos, 1e-6))
    phi = float(np.clip(phi, -phi_max, phi_max))
    lift = math.hypot(l_sin, l_cos)
    q = 0.5 * airframe.rho * va * va * airframe.S
    cl = lift / q
    alpha = cl / lift_slope(airframe)
    alpha = float(np.clip(alpha, -0.35, 0.35))

    omega_v = np.array([0.0, gamma_dot, psi_dot])

    cd = airframe.C_D0 + airframe.k_induced * cl * cl
    drag = q * cd
    energy_pitch = 0.0
    if mode == "glide":
        u = 0.0
        # without thrust the along-track demand is realized by steering
        # the altitude-for-airspeed exchange: bias pitch by the energy
        # angle separating the demand from the free-glide acceleration
        a_free = -g * sg - drag / airframe.m
        energy_pitch = float(np.clip(-(a_t - a_free) / g, -0.35, 0.35))
    else:
        t_req = drag + airframe.m * g * sg + airframe.m * a_t
        t_max = thrust_max if thrust_max is not None else 0.6 * airframe.m * g
        u = float(np.clip(t_req / t_max, 0.0, 1.0))
    theta = gamma + alpha + energy_pitch
    return AttitudeCommand(
        theta_c=theta, phi_c=phi, psi_c=psi, omega_v=omega_v, thrust=u
    )


# ----------------------------------------------------------------------
class ArcLengthSampler:
    """Reference generator flying a trajectory at constant airspeed.

    Precomputes the arc-length profile of the geometric path and the
    ground speed along it from the wind triangle (the wind component
    perpendicular to the track reduces the achievable along-track
    speed). Wall time maps to curve parameter through a monotone spline,
    so flat states up to the third derivative come out of the chain
    rule; positions are exact points of the original path.
    """

    def __init__(
        self,
        traj: CompositeTrajectory,
        v_ref: float,
        wind=(0.0, 0.0, 0.0),
        resolution: int = 2000,
    ):
        if v_ref <= 0.0:
            raise ValueError("reference airspeed must be positive")
        wind = np.asarray(wind, dtype=float)
        if wind.shape != (3,):
            raise ValueError("wind must be a 3-vector")
        self.traj = traj
        self.v_ref = float(v_ref)
        self.wind = wind

        tau = np.linspace(traj.t0, traj.tf, max(int(resolution), 200))
        vel = traj.eval(tau, k=1)
        speed = np.linalg.norm(vel, axis=1)
        if np.any(speed < 1e-9):
            raise ValueError(
                "trajectory has vanishing parametric speed; cannot "
                "reparameterize by arc length"
            )
        t_hat = vel / speed[:, None]
        w_along = t_hat @ wind
        w_perp_sq = float(wind @ wind) - w_along**2
        margin = self.v_ref**2 - w_perp_sq
        if np.any(margin <= 0.0):
            raise ValueError(
                f"crosswind exceeds reference airspeed {self.v_ref:g} m/s; "
                "ground speed undefined"
            )
        vg = w_along + np.sqrt(margin)
        if np.any(vg <= 0.1):
            raise ValueError("headwind leaves no positive ground speed")

        # wall time along the path: dt = ds / Vg, ds = |x'(tau)| dtau
        dt_dtau = speed / vg
        t_wall = np.concatenate(
            ([0.0], cumulative_trapezoid(dt_dtau, tau))
        )
        self.total_time = float(t_wall[-1])
        self.arc_total = float(
            np.concatenate(([0.0], cumulative_trapezoid(speed, tau)))[-1]
        )
        # strictly monotone by construction (dt/dtau > 0)
        self._tau_of_t = CubicSpline(t_wall, tau)

    def state(self, t: float) -> FlatState:
        """Flat reference state at wall time t in [0, total_time]."""
        t = float(np.clip(t, 0.0, self.total_time))
        tau = float(self._tau_of_t(t))
        tau = min(max(tau, self.traj.t0), self.traj.tf)
        tau_d1 = float(self._tau_of_t(t, 1))
        tau_d2 = float(self._tau_of_t(t, 2))
        tau_d3 = float(self._tau_of_t(t, 3))
        c1 = self.traj.eval(tau, 1)
        c2 = self.traj.eval(tau, 2)
        c3 = self.traj.eval(tau, 3)
        x = self.traj.eval(tau)
        x_dot = c1 * tau_d1
        x_ddot = c2 * tau_d1**2 + c1 * tau_d2
        x_dddot = (
            c3 * tau_d1**3 + 3.0 * c2 * tau_d1 * tau_d2 + c1 * tau_d3
        )
        return FlatState(x, x_dot, x_ddot, x_dddot)

    def position(self, t: float) -> np.ndarray:
        return self.state(t).x

    def done(self, t: float) -> bool:
        return t >= self.total_time


def arc_length_param(
    traj: CompositeTrajectory,
    v_ref: float,
    wind=(0.0, 0.0, 0.0),
    resolution: int = 2000,
) -> ArcLengthSampler:
    """Build the arc-length reference sampler for a planned trajectory."""
    return ArcLengthSampler(traj, v_ref, wind, resolution)
