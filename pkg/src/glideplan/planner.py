"""Multi-cost trajectory optimization over composite Bernstein curves.

Decision parameterization. Rather than optimizing raw control points and
pinning continuity with equality constraints, each segment's first and
last four control points are built from shared junction states
(position, velocity, acceleration, jerk) and the segment duration; the
remaining interior points and the durations are free. Segments that
share a junction state are C^3 across the knot to machine precision, so
the NLP carries no equality rows and the solver only fights
inequalities. The equality evaluator still exists and reports the
(near-zero) junction residuals for diagnostics.

Cost is sigma0 * J + sigma1 * T + sigma2 * W_perp with J the integral of
squared jerk (exact, via Bernstein products), T the summed durations and
W_perp the negated sum of wind projections onto the XY velocity control
points.

Constraints are enforced on control points of derived curves, which by
the convex-hull property bounds the continuous signal:

  * heading rate   |vx ay - ax vy| <= omega_max (vx^2 + vy^2)
  * speed band     (Vg_target^2 - xi) <= vx^2 + vy^2 <= (.. + xi)
  * sink band      glide only; the polar sink at reference airspeed with
                   coordinated-turn bank tan(phi) = Va * psi_dot / g,
                   cleared of denominators by multiplying through den^2
  * obstacles      (x - xo)^2 + (y - yo)^2 >= d_safe^2, with the margin
                   widened by 2 max(sigma) for obstacles marked hard

Gradients are analytic: the whole pipeline is linear/bilinear in the
decision variables, propagated per segment as (value, Jacobian) pairs.
A central finite-difference fallback is kept for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dubins
from .aero import Airframe, SinkPolar, sink_rate
from .bernstein import BernsteinCurve, CompositeTrajectory, segment_from_states
from .solver import (
    MultiplierState,
    NlpProblem,
    SolveOptions,
    SolveReport,
    solve_augmented_lagrangian,
)

__all__ = [
    "CostWeights",
    "ConstraintSet",
    "GaussianObstacle",
    "PlanProblem",
    "PlanInfeasibleError",
    "PRESET_MIN_JERK",
    "PRESET_MIN_TIME",
    "jerk_cost",
    "time_cost",
    "wind_cost",
    "assemble_nlp",
    "AssembledNlp",
    "solve",
    "plan_cruise",
    "plan_glide",
    "replan",
    "dubins_seed_waypoints",
    "glide_endpoint_states",
    "cruise_endpoint_states",
    "verify_trajectory",
    "default_constraints",
]


class PlanInfeasibleError(RuntimeError):
    """Raised when the solver cannot reach the feasibility tolerance."""

    def __init__(self, message: str, family: str = "", report=None):
        super().__init__(message)
        self.family = family
        self.report = report


@dataclass(frozen=True)
class CostWeights:
    """Weights (sigma0, sigma1, sigma2) on jerk, time and wind terms."""

    sigma0: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if min(self.sigma0, self.sigma1, self.sigma2) < 0.0:
            raise ValueError("cost weights must be non-negative")
        if self.sigma0 + self.sigma1 + self.sigma2 <= 0.0:
            raise ValueError("at least one cost weight must be positive")


PRESET_MIN_JERK = CostWeights(10.0, 0.1, 0.1)
PRESET_MIN_TIME = CostWeights(0.1, 10.0, 0.1)


@dataclass
class GaussianObstacle:
    """Planar Gaussian bump obstacle (center, footprint, height)."""

    x_o: float
    y_o: float
    h: float
    sigma_x: float
    sigma_y: float
    hard: bool = False

    def __post_init__(self):
        if self.sigma_x <= 0.0 or self.sigma_y <= 0.0:
            raise ValueError("obstacle sigmas must be positive")
        if self.h < 0.0:
            raise ValueError("obstacle height must be non-negative")

    def height_at(self, x: float, y: float) -> float:
        dx = (x - self.x_o) / self.sigma_x
        dy = (y - self.y_o) / self.sigma_y
        return self.h * math.exp(-0.5 * (dx * dx + dy * dy))


@dataclass
class ConstraintSet:
    """Path constraint parameters plus boundary states.

    start_state/end_state are (3, 3) arrays with rows position,
    velocity, acceleration. In glide mode the terminal z position is
    released and chosen by the optimizer.
    """

    omega_max: float
    vg_target: float
    xi: float
    vz_band: float
    d_safe: float
    start_state: np.ndarray = field(
        default_factory=lambda: np.zeros((3, 3))
    )
    end_state: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    continuity_order: int = 3

    def __post_init__(self):
        if self.omega_max <= 0.0:
            raise ValueError("omega_max must be positive")
        if self.vg_target <= 0.0:
            raise ValueError("vg_target must be positive")
        if self.xi <= 0.0 or self.vz_band <= 0.0:
            raise ValueError("band half-widths must be positive")
        if self.d_safe < 0.0:
            raise ValueError("d_safe must be non-negative")
        if self.continuity_order != 3:
            raise ValueError("composite construction fixes continuity at C^3")
        self.start_state = np.asarray(self.start_state, dtype=float)
        self.end_state = np.asarray(self.end_state, dtype=float)
        if self.start_state.shape != (3, 3) or self.end_state.shape != (3, 3):
            raise ValueError("endpoint states must be (3, 3) pos/vel/acc")


@dataclass
class PlanProblem:
    """Everything one optimization run needs."""

    mode: str
    waypoints: np.ndarray
    airframe: Airframe
    polar: SinkPolar
    wind: np.ndarray
    obstacles: list = field(default_factory=list)
    weights: CostWeights = PRESET_MIN_JERK
    constraints: ConstraintSet | None = None
    va_ref: float = 12.5
    n_ctrl: int = 10
    n_segments: int = 2
    t_start: float = 0.0
    grace: float = 0.0
    speed_slack: float = 1.2
    dur_bounds: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("cruise", "glide"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, float))
        if self.waypoints.shape[1] != 3:
            raise ValueError("waypoints must be (K, 3)")
        if self.mode == "glide" and self.waypoints.shape[0] != 2:
            raise ValueError("glide problems take exactly start/end waypoints")
        if self.mode == "cruise" and self.waypoints.shape[0] < 2:
            raise ValueError("cruise problems need at least two waypoints")
        self.wind = np.asarray(self.wind, dtype=float)
        if self.wind.shape != (3,):
            raise ValueError("wind must be a 3-vector")
        if self.n_ctrl < 8:
            raise ValueError(
                "need at least 8 control points per segment to pin C^3 "
                "boundary states"
            )
        if not 0.0 <= self.grace < 0.5:
            raise ValueError("grace fraction must lie in [0, 0.5)")
        if self.va_ref <= 0.0:
            raise ValueError("reference airspeed must be positive")

    @property
    def n_seg(self) -> int:
        if self.mode == "cruise":
            return self.waypoints.shape[0] - 1
        return self.n_segments


# ----------------------------------------------------------------------
# Public cost functionals (also the oracles for the jet-based objective)
# ----------------------------------------------------------------------
def jerk_cost(traj: CompositeTrajectory) -> float:
    """Integral of squared jerk over the trajectory, computed exactly."""
    from .bernstein import product

    total = 0.0
    for seg in traj.segments:
        j = seg.derivative(3)
        for ax in range(seg.dim):
            comp = j.component(ax)
            total += float(product(comp, comp).integral()[0])
    return total


def time_cost(traj: CompositeTrajectory) -> float:
    """Total duration (sum of segment durations)."""
    return traj.duration


def wind_cost(traj: CompositeTrajectory, wind) -> float:
    """Negated wind projection summed over XY velocity control points."""
    wind = np.asarray(wind, dtype=float)
    total = 0.0
    for seg in traj.segments:
        vcp = seg.derivative(1).control_points
        total -= float(vcp[:, 0] @ np.full(vcp.shape[0], wind[0]) +
                       vcp[:, 1] @ np.full(vcp.shape[0], wind[1]))
    return total


# ----------------------------------------------------------------------
# Batched curve "jets": (value, Jacobian wrt segment-local variables)
# ----------------------------------------------------------------------
_N_LOCAL = 31  # 10 per axis (P0 V0 A0 J0 P1 V1 A1 J1 I0 I1) + duration
_SLOT_DT = 30

# All inequality rows are shifted by this much in scaled units. The
# solver's feasibility tolerance then still leaves the unshifted rows
# strictly positive, so control-point feasibility certifies the dense
# trajectory through the convex-hull bound.
_ROW_MARGIN = 2e-3

_prod_cache: dict = {}


def _prod_tensor(na: int, nb: int) -> np.ndarray:
    """W[i,j,k] with product coefficients c_k = sum W[i,j,k] a_i b_j."""
    key = (na, nb)
    W = _prod_cache.get(key)
    if W is None:
        from .bernstein import _binomials

        wa, wb, wc = _binomials(na), _binomials(nb), _binomials(na + nb)
        W = np.zeros((na + 1, nb + 1, na + nb + 1))
        for i in range(na + 1):
            for j in range(nb + 1):
                W[i, j, i + j] = wa[i] * wb[j] / wc[i + j]
        _prod_cache[key] = W
    return W


def _jmul(a, b):
    """Product of two batched 1-D curve jets."""
    va, Ja = a
    vb, Jb = b
    W = _prod_tensor(va.shape[1] - 1, vb.shape[1] - 1)
    tmp = np.tensordot(vb, W, axes=([1], [1]))  # (M, i, k)
    val = np.sum(va[:, :, None] * tmp, axis=1)  # (M, k)
    jac = None
    if Ja is not None or Jb is not None:
        jac = 0.0
        if Ja is not None:
            jac = np.matmul(tmp.transpose(0, 2, 1), Ja)  # (M,k,i)@(M,i,p)
        if Jb is not None:
            tmp2 = np.tensordot(va, W, axes=([1], [0]))  # (M, j, k)
            jac = jac + np.matmul(tmp2.transpose(0, 2, 1), Jb)
    return val, jac


def _jadd(a, b):
    va, Ja = a
    vb, Jb = b
    jac = None
    if Ja is not None or Jb is not None:
        jac = (Ja if Ja is not None else 0.0) + (
            Jb if Jb is not None else 0.0
        )
    return va + vb, jac


def _jscale(a, k: float):
    va, Ja = a
    return k * va, None if Ja is None else k * Ja


def _jdiff(a):
    va, Ja = a
    return np.diff(va, axis=1), None if Ja is None else np.diff(Ja, axis=1)


def _jelevate(a, r: int):
    if r <= 0:
        return a
    va, Ja = a
    M = va.shape[0]
    ones = (np.ones((M, r + 1)), None)
    return _jmul(a, ones)


def _jscale_by_scalar(curve, scalar):
    """Curve jet times a per-segment scalar jet (product rule)."""
    cv, cJ = curve
    sv, sJ = scalar
    val = sv[:, None] * cv
    jac = None
    if cJ is not None or sJ is not None:
        jac = 0.0
        if cJ is not None:
            jac = sv[:, None, None] * cJ
        if sJ is not None:
            jac = jac + cv[:, :, None] * sJ[:, None, :]
    return val, jac


def _smul(a, b):
    """Product of two per-segment scalar jets."""
    va, Ja = a
    vb, Jb = b
    jac = None
    if Ja is not None or Jb is not None:
        jac = 0.0
        if Ja is not None:
            jac = vb[:, None] * Ja
        if Jb is not None:
            jac = jac + va[:, None] * Jb
    return va * vb, jac


def _jintegral(curve, dt_jet):
    """Per-segment integral of a 1-D curve jet: dt * mean(coefs)."""
    cv, cJ = curve
    L = cv.shape[1]
    mean = (cv.mean(axis=1), None if cJ is None else cJ.mean(axis=1))
    return _smul(mean, dt_jet)


# ----------------------------------------------------------------------
# Decision-vector layout
# ----------------------------------------------------------------------
class _Layout:
    """Bookkeeping between the flat decision vector and segment locals."""

    def __init__(self, problem: PlanProblem):
        cs = problem.constraints
        if cs is None:
            raise ValueError("problem.constraints must be set before assembly")
        M = problem.n_seg
        d = problem.n_ctrl - 1
        n_int = problem.n_ctrl - 8
        self.M, self.d, self.n_int = M, d, n_int
        self.problem = problem

        free_end_z = problem.mode == "glide"
        hard_pass = problem.mode == "cruise"

        # knot seed positions: cruise pins junctions at the waypoints,
        # glide spreads junctions along the straight chord
        if problem.mode == "cruise":
            self.junction_pos_fixed = problem.waypoints[1:-1].copy()
        else:
            frac = np.linspace(0.0, 1.0, M + 1)[1:-1, None]
            p0, p1 = problem.waypoints[0], problem.waypoints[1]
            self.junction_pos_fixed = p0 + frac * (p1 - p0)

        idx = 0

        def take(k):
            nonlocal idx
            out = np.arange(idx, idx + k)
            idx += k
            return out

        self.i_dur = take(M)
        self.i_jerk0 = take(3)
        self.i_jerkf = take(3)
        self.i_endz = int(take(1)[0]) if free_end_z else None
        self.i_jpos = []
        self.i_jvel = []
        self.i_jacc = []
        self.i_jjerk = []
        for _ in range(M - 1):
            self.i_jpos.append(None if hard_pass else take(3))
            self.i_jvel.append(take(3))
            self.i_jacc.append(take(3))
            self.i_jjerk.append(take(3))
        self.i_int = take(M * n_int * 3).reshape(M, n_int, 3)
        self.n = idx

        # per-segment local -> global maps and fixed values
        self.loc2glob = -np.ones((M, _N_LOCAL), dtype=int)
        self.locfix = np.zeros((M, _N_LOCAL))
        cs_start = cs.start_state
        cs_end = cs.end_state
        for m in range(M):
            for a in range(3):
                base = 10 * a
                # start of segment m
                if m == 0:
                    self.locfix[m, base + 0] = cs_start[0, a]
                    self.locfix[m, base + 1] = cs_start[1, a]
                    self.locfix[m, base + 2] = cs_start[2, a]
                    self.loc2glob[m, base + 3] = self.i_jerk0[a]
                else:
                    j = m - 1
                    if self.i_jpos[j] is None:
                        self.locfix[m, base + 0] = self.junction_pos_fixed[j, a]
                    else:
                        self.loc2glob[m, base + 0] = self.i_jpos[j][a]
                    self.loc2glob[m, base + 1] = self.i_jvel[j][a]
                    self.loc2glob[m, base + 2] = self.i_jacc[j][a]
                    self.loc2glob[m, base + 3] = self.i_jjerk[j][a]
                # end of segment m
                if m == M - 1:
                    if a == 2 and self.i_endz is not None:
                        self.loc2glob[m, base + 4] = self.i_endz
                    else:
                        self.locfix[m, base + 4] = cs_end[0, a]
                    self.locfix[m, base + 5] = cs_end[1, a]
                    self.locfix[m, base + 6] = cs_end[2, a]
                    self.loc2glob[m, base + 7] = self.i_jerkf[a]
                else:
                    j = m
                    if self.i_jpos[j] is None:
                        self.locfix[m, base + 4] = self.junction_pos_fixed[j, a]
                    else:
                        self.loc2glob[m, base + 4] = self.i_jpos[j][a]
                    self.loc2glob[m, base + 5] = self.i_jvel[j][a]
                    self.loc2glob[m, base + 6] = self.i_jacc[j][a]
                    self.loc2glob[m, base + 7] = self.i_jjerk[j][a]
                for q in range(n_int):
                    self.loc2glob[m, base + 8 + q] = self.i_int[m, q, a]
            self.loc2glob[m, _SLOT_DT] = self.i_dur[m]

        # nondimensionalization
        if problem.mode == "cruise":
            chords = np.linalg.norm(np.diff(problem.waypoints, axis=0), axis=1)
        else:
            chord = np.linalg.norm(
                problem.waypoints[1] - problem.waypoints[0]
            )
            chords = np.full(M, chord / M)
        self.chords = np.maximum(chords, 1.0)
        L0 = float(self.chords.mean())
        T0 = L0 / cs.vg_target
        self.scale = np.ones(self.n)
        self.scale[self.i_dur] = T0
        kind_scale = {
            0: L0, 1: L0 / T0, 2: L0 / T0**2, 3: L0 / T0**3,
        }
        self.scale[self.i_jerk0] = kind_scale[3]
        self.scale[self.i_jerkf] = kind_scale[3]
        if self.i_endz is not None:
            self.scale[self.i_endz] = kind_scale[0]
        for j in range(M - 1):
            if self.i_jpos[j] is not None:
                self.scale[self.i_jpos[j]] = kind_scale[0]
            self.scale[self.i_jvel[j]] = kind_scale[1]
            self.scale[self.i_jacc[j]] = kind_scale[2]
            self.scale[self.i_jjerk[j]] = kind_scale[3]
        self.scale[self.i_int.ravel()] = kind_scale[0]

        # duration bounds: lower from the minimum-time heuristic
        self.t_min = np.maximum(self.chords / (1.5 * problem.va_ref), 0.2)
        self.t_max = np.maximum(8.0 * self.chords / cs.vg_target, 5.0)
        if problem.dur_bounds is not None:
            lo_o, hi_o = (np.broadcast_to(np.asarray(a, float), (self.M,))
                          for a in problem.dur_bounds)
            self.t_min = np.maximum(lo_o, 0.2)
            self.t_max = np.maximum(hi_o, self.t_min * 1.05)

    # ------------------------------------------------------------------
    def locals_phys(self, z_phys: np.ndarray):
        """(M, 31) matrix of local variable values (fixed + decision)."""
        vals = self.locfix.copy()
        mask = self.loc2glob >= 0
        vals[mask] = z_phys[self.loc2glob[mask]]
        return vals

    def local_scales(self) -> np.ndarray:
        """(M, 31) chain-rule factors d(local phys)/d(global scaled)."""
        sc = np.zeros((self.M, _N_LOCAL))
        mask = self.loc2glob >= 0
        sc[mask] = self.scale[self.loc2glob[mask]]
        return sc

    def bounds(self):
        lo = np.full(self.n, -np.inf)
        hi = np.full(self.n, np.inf)
        lo[self.i_dur] = self.t_min / self.scale[self.i_dur]
        hi[self.i_dur] = self.t_max / self.scale[self.i_dur]
        return lo, hi


# ----------------------------------------------------------------------
def _position_jets(layout: _Layout, locals_mat, with_jac: bool):
    """Per-axis position control-point jets (M, n_ctrl) from locals.

    Closed-form expansion of the boundary-state construction: the first
    and last four control points are linear in the states with duration
    monomial coefficients, the rest are the interior variables.
    """
    M, d = layout.M, layout.d
    NL = _N_LOCAL
    dt = locals_mat[:, _SLOT_DT]
    k1 = 1.0 / d
    k2 = 1.0 / (d * (d - 1))
    k3 = 1.0 / (d * (d - 1) * (d - 2))
    c1, c2, c3 = dt * k1, dt * dt * k2, dt**3 * k3
    dc1, dc2, dc3 = k1, 2.0 * dt * k2, 3.0 * dt * dt * k3

    dt_jac = None
    if with_jac:
        dt_jac = np.zeros((M, NL))
        dt_jac[:, _SLOT_DT] = 1.0

    axes = []
    for a in range(3):
        b = 10 * a
        S = locals_mat[:, b : b + 10]
        val = np.empty((M, d + 1))
        val[:, 0] = S[:, 0]
        val[:, 1] = S[:, 0] + S[:, 1] * c1
        val[:, 2] = S[:, 0] + 2 * S[:, 1] * c1 + S[:, 2] * c2
        val[:, 3] = (
            S[:, 0] + 3 * S[:, 1] * c1 + 3 * S[:, 2] * c2 + S[:, 3] * c3
        )
        for q in range(layout.n_int):
            val[:, 4 + q] = S[:, 8 + q]
        val[:, d - 3] = (
            S[:, 4] - 3 * S[:, 5] * c1 + 3 * S[:, 6] * c2 - S[:, 7] * c3
        )
        val[:, d - 2] = S[:, 4] - 2 * S[:, 5] * c1 + S[:, 6] * c2
        val[:, d - 1] = S[:, 4] - S[:, 5] * c1
        val[:, d] = S[:, 4]

        jac = None
        if with_jac:
            jac = np.zeros((M, d + 1, NL))
            jac[:, 0, b] = 1.0
            jac[:, 1, b] = 1.0
            jac[:, 1, b + 1] = c1
            jac[:, 1, _SLOT_DT] = S[:, 1] * dc1
            jac[:, 2, b] = 1.0
            jac[:, 2, b + 1] = 2 * c1
            jac[:, 2, b + 2] = c2
            jac[:, 2, _SLOT_DT] = 2 * S[:, 1] * dc1 + S[:, 2] * dc2
            jac[:, 3, b] = 1.0
            jac[:, 3, b + 1] = 3 * c1
            jac[:, 3, b + 2] = 3 * c2
            jac[:, 3, b + 3] = c3
            jac[:, 3, _SLOT_DT] = (
                3 * S[:, 1] * dc1 + 3 * S[:, 2] * dc2 + S[:, 3] * dc3
            )
            for q in range(layout.n_int):
                jac[:, 4 + q, b + 8 + q] = 1.0
            jac[:, d - 3, b + 4] = 1.0
            jac[:, d - 3, b + 5] = -3 * c1
            jac[:, d - 3, b + 6] = 3 * c2
            jac[:, d - 3, b + 7] = -c3
            jac[:, d - 3, _SLOT_DT] = (
                -3 * S[:, 5] * dc1 + 3 * S[:, 6] * dc2 - S[:, 7] * dc3
            )
            jac[:, d - 2, b + 4] = 1.0
            jac[:, d - 2, b + 5] = -2 * c1
            jac[:, d - 2, b + 6] = c2
            jac[:, d - 2, _SLOT_DT] = -2 * S[:, 5] * dc1 + S[:, 6] * dc2
            jac[:, d - 1, b + 4] = 1.0
            jac[:, d - 1, b + 5] = -c1
            jac[:, d - 1, _SLOT_DT] = -S[:, 5] * dc1
            jac[:, d, b + 4] = 1.0
        axes.append((val, jac))
    return axes, (dt, dt_jac)


def _derivative_jet(curve, dt_jet, order_deg: int):
    """d/dt of a curve jet: difference then scale by degree / dt."""
    dv, dJ = dt_jet
    inv = (1.0 / dv, None if dJ is None else -dJ / (dv * dv)[:, None])
    return _jscale_by_scalar(_jdiff(curve), _jscale(inv, float(order_deg)))


# ----------------------------------------------------------------------
@dataclass
class AssembledNlp:
    """Planner NLP plus the bookkeeping to decode solutions."""

    problem: PlanProblem
    layout: _Layout
    nlp: NlpProblem
    families: dict
    row_counts: dict

    def decode(self, z_scaled: np.ndarray) -> CompositeTrajectory:
        lay = self.layout
        z_phys = z_scaled * lay.scale
        locals_mat = lay.locals_phys(z_phys)
        t0 = self.problem.t_start
        segs = []
        for m in range(lay.M):
            dt = locals_mat[m, _SLOT_DT]
            start = np.empty((4, 3))
            end = np.empty((4, 3))
            interior = np.empty((lay.n_int, 3))
            for a in range(3):
                b = 10 * a
                start[:, a] = locals_mat[m, b : b + 4]
                end[:, a] = locals_mat[m, b + 4 : b + 8]
                interior[:, a] = locals_mat[m, b + 8 : b + 8 + lay.n_int]
            segs.append(
                segment_from_states(start, end, interior, t0, t0 + dt)
            )
            t0 += dt
        return CompositeTrajectory(segs)

    def dump(self) -> dict:
        lay = self.layout
        lo, hi = lay.bounds()
        return {
            "mode": self.problem.mode,
            "segments": lay.M,
            "control_points_per_segment": lay.d + 1,
            "decision_variables": lay.n,
            "inequality_rows": {k: int(v) for k, v in self.row_counts.items()},
            "duration_bounds_s": [
                [round(float(a), 4), round(float(b), 4)]
                for a, b in zip(lay.t_min, lay.t_max)
            ],
            "scales": {
                "length": float(lay.chords.mean()),
                "time": float(
                    lay.chords.mean() / self.problem.constraints.vg_target
                ),
            },
        }


def assemble_nlp(problem: PlanProblem) -> AssembledNlp:
    """Build the scaled NLP with analytic gradients for one problem."""
    lay = _Layout(problem)
    cs = problem.constraints
    M, d = lay.M, lay.d
    wind = problem.wind
    vg = cs.vg_target
    omega_max = cs.omega_max
    af, polar = problem.airframe, problem.polar

    # sink-band constants at the reference airspeed
    cl = af.lift_coefficient(problem.va_ref)
    s1 = problem.va_ref * (polar.P / cl + polar.B * cl)
    s2 = problem.va_ref**3 * polar.B * cl / af.g**2

    glide = problem.mode == "glide"
    n_obs = len(problem.obstacles)
    d_eff = []
    for ob in problem.obstacles:
        extra = 2.0 * max(ob.sigma_x, ob.sigma_y) if ob.hard else 0.0
        d_eff.append(cs.d_safe + extra)

    # row masks implementing the replanning grace window on segment 0
    def grace_mask(n_rows_per_seg: int) -> np.ndarray:
        mask = np.ones((M, n_rows_per_seg), dtype=bool)
        skip = int(math.ceil(problem.grace * n_rows_per_seg))
        if skip > 0:
            mask[0, :skip] = False
        return mask.ravel()

    local_sc = lay.local_scales()
    # fixed local->global scatter pattern, hoisted out of the eval path
    _ok_flat = np.flatnonzero((lay.loc2glob >= 0).ravel())
    _cols_flat = lay.loc2glob.ravel()[_ok_flat]
    _seg_cols = []
    for m in range(M):
        cols = lay.loc2glob[m]
        ok = cols >= 0
        _seg_cols.append((ok, cols[ok], local_sc[m][ok]))
    cache: dict = {}

    def forward(z_scaled: np.ndarray, with_jac: bool):
        key = (z_scaled.tobytes(), with_jac)
        hit = cache.get("key") == key
        if hit:
            return cache["out"]
        z_phys = z_scaled * lay.scale
        locals_mat = lay.locals_phys(z_phys)
        pos, dt_jet = _position_jets(lay, locals_mat, with_jac)
        vel = [_derivative_jet(p, dt_jet, d) for p in pos]
        acc = [_derivative_jet(v, dt_jet, d - 1) for v in vel]
        jrk = [_derivative_jet(a, dt_jet, d - 2) for a in acc]
        out = {
            "pos": pos, "vel": vel, "acc": acc, "jrk": jrk,
            "dt": dt_jet, "locals": locals_mat,
        }
        # shared curve products
        vx, vy = vel[0], vel[1]
        ax, ay = acc[0], acc[1]
        out["den"] = _jadd(_jmul(vx, vx), _jmul(vy, vy))
        out["num"] = _jadd(_jmul(vx, ay), _jscale(_jmul(ax, vy), -1.0))
        if glide:
            den2 = _jmul(out["den"], out["den"])
            num2 = _jmul(out["num"], out["num"])
            zd_den2 = _jmul(vel[2], den2)
            # common degree
            deg_t = (den2[0].shape[1] - 1) + (vel[2][0].shape[1] - 1)
            out["den2"] = _jelevate(den2, deg_t - (den2[0].shape[1] - 1))
            out["num2"] = _jelevate(num2, deg_t - (num2[0].shape[1] - 1))
            out["zd_den2"] = zd_den2
        cache["key"] = key
        cache["out"] = out
        return out

    # ------------------------------------------------------------------
    def scatter_rows(vals: np.ndarray, jacs, row_scale: float, mask=None):
        """Flatten per-segment curve rows into global (c, J) blocks."""
        M_, L = vals.shape
        c = (vals * row_scale).ravel() - _ROW_MARGIN
        J = None
        if jacs is not None:
            J = np.zeros((M_ * L, lay.n))
            for m in range(M_):
                ok, cols, sc = _seg_cols[m]
                J[m * L : (m + 1) * L, cols] = (
                    jacs[m][:, ok] * (row_scale * sc)
                )
        if mask is not None:
            c = c[mask]
            if J is not None:
                J = J[mask]
        return c, J

    def eval_inequality(z_scaled: np.ndarray, with_jac: bool):
        out = forward(z_scaled, with_jac)
        den, num = out["den"], out["num"]
        Lden = den[0].shape[1]
        num_e = _jelevate(num, Lden - num[0].shape[1])
        rows = []
        jacs = []

        def push(jet, row_scale, mask=None):
            c, J = scatter_rows(jet[0], jet[1], row_scale, mask)
            rows.append(c)
            jacs.append(J)

        sc_rate = 1.0 / (omega_max * vg * vg)
        m_h = grace_mask(Lden)
        push(_jadd(_jscale(den, omega_max), _jscale(num_e, -1.0)),
             sc_rate, m_h)
        push(_jadd(_jscale(den, omega_max), num_e), sc_rate, m_h)

        lo = vg * vg - cs.xi
        hi = vg * vg + cs.xi
        sc_speed = 1.0 / (vg * vg)
        m_s = grace_mask(Lden)
        push(_jadd(den, (np.full_like(den[0], -lo), None)), sc_speed, m_s)
        push(_jadd(_jscale(den, -1.0), (np.full_like(den[0], hi), None)),
             sc_speed, m_s)

        if glide:
            den2, num2, zd_den2 = out["den2"], out["num2"], out["zd_den2"]
            Ls = zd_den2[0].shape[1]
            den2 = _jelevate(den2, Ls - den2[0].shape[1])
            num2 = _jelevate(num2, Ls - num2[0].shape[1])
            vz_nom = _jadd(_jscale(den2, s1), _jscale(num2, s2))
            band = _jscale(den2, cs.vz_band)
            sc_sink = 1.0 / (vg**4)
            m_z = grace_mask(Ls)
            # vz_nom + band + zdot*den^2 >= 0   (zdot >= -(vz_nom+band)/den^2)
            push(_jadd(_jadd(vz_nom, band), zd_den2), sc_sink, m_z)
            # -zdot*den^2 - vz_nom + band >= 0
            push(_jadd(_jadd(_jscale(vz_nom, -1.0), band),
                       _jscale(zd_den2, -1.0)), sc_sink, m_z)

        for ob, deff in zip(problem.obstacles, d_eff):
            px, py = out["pos"][0], out["pos"][1]
            dx = _jadd(px, (np.full_like(px[0], -ob.x_o), None))
            dy = _jadd(py, (np.full_like(py[0], -ob.y_o), None))
            d2 = _jadd(_jmul(dx, dx), _jmul(dy, dy))
            Lo = d2[0].shape[1]
            m_o = grace_mask(Lo)
            push(_jadd(d2, (np.full_like(d2[0], -deff * deff), None)),
                 1.0 / max(deff * deff, 25.0), m_o)

        c = np.concatenate(rows)
        J = np.vstack(jacs) if with_jac else None
        return c, J

    # family slices for diagnostics
    Lden = 2 * (d - 1) + 1
    n_rate_seg = Lden
    skip = lambda L: int(math.ceil(problem.grace * L))
    n_rate = 2 * (M * Lden - skip(Lden))
    n_speed = 2 * (M * Lden - skip(Lden))
    Ls = (d - 1) + 4 * (d - 1) + 1
    n_sink = 2 * (M * Ls - skip(Ls)) if glide else 0
    Lo = 2 * d + 1
    n_obs_rows = n_obs * (M * Lo - skip(Lo))
    families = {}
    pos0 = 0
    for name, count in (
        ("heading_rate", n_rate),
        ("speed_band", n_speed),
        ("sink_band", n_sink),
        ("obstacle", n_obs_rows),
    ):
        families[name] = slice(pos0, pos0 + count)
        pos0 += count
    row_counts = {
        "heading_rate": n_rate,
        "speed_band": n_speed,
        "sink_band": n_sink,
        "obstacle": n_obs_rows,
        "total": pos0,
    }

    # ------------------------------------------------------------------
    w0, w1, w2 = (
        problem.weights.sigma0,
        problem.weights.sigma1,
        problem.weights.sigma2,
    )

    def eval_objective(z_scaled: np.ndarray):
        out = forward(z_scaled, True)
        dt_jet = out["dt"]
        f = 0.0
        C = np.zeros((M, _N_LOCAL))  # d f / d locals, summed over terms

        def accum(scalar_jet, w):
            nonlocal f, C
            if w == 0.0:
                return
            val, J = scalar_jet
            f += w * float(val.sum())
            C = C + w * J

        for axjer in out["jrk"]:
            accum(_jintegral(_jmul(axjer, axjer), dt_jet), w0)
        accum(dt_jet, w1)
        for axv, w_ax in ((out["vel"][0], wind[0]), (out["vel"][1], wind[1])):
            if w2 * w_ax != 0.0:
                vv, vJ = axv
                accum((vv.sum(axis=1), vJ.sum(axis=1)), -w2 * w_ax)
        contrib = (C * local_sc).ravel()[_ok_flat]
        g = np.bincount(_cols_flat, weights=contrib, minlength=lay.n)
        return f, g

    def ineq_with_jac(z_scaled: np.ndarray):
        return eval_inequality(z_scaled, True)

    def eq_report(z_scaled: np.ndarray):
        # junction continuity holds by construction; report residuals
        traj = assembled.decode(z_scaled)
        errs = traj.continuity_errors(3)
        return errs, np.zeros((errs.size, lay.n))

    lo, hi = lay.bounds()
    nlp = NlpProblem(
        n=lay.n,
        objective=eval_objective,
        inequality=ineq_with_jac,
        equality=None,
        bounds=(lo, hi),
        families=families,
    )
    assembled = AssembledNlp(
        problem=problem,
        layout=lay,
        nlp=nlp,
        families=families,
        row_counts=row_counts,
    )
    assembled.equality_report = eq_report
    return assembled


# ----------------------------------------------------------------------
# Seeding
# ----------------------------------------------------------------------
def _warp_clear(points: np.ndarray, problem: PlanProblem) -> np.ndarray:
    """Elastically push a polyline out of obstacle margins (XY only)."""
    if not problem.obstacles:
        return points
    cs = problem.constraints
    pts = points.copy()
    p0, p1 = points[0].copy(), points[-1].copy()
    for _ in range(16):
        moved = False
        for ob in problem.obstacles:
            extra = 2.0 * max(ob.sigma_x, ob.sigma_y) if ob.hard else 0.0
            deff = 1.05 * (cs.d_safe + extra)
            dx = pts[:, 0] - ob.x_o
            dy = pts[:, 1] - ob.y_o
            r = np.hypot(dx, dy)
            mask = r < deff
            if mask.any():
                moved = True
                safe_r = np.maximum(r, 1e-6)
                ux = np.where(r > 1e-6, dx / safe_r, 0.0)
                uy = np.where(r > 1e-6, dy / safe_r, 1.0)
                pts[mask, 0] = ob.x_o + ux[mask] * deff
                pts[mask, 1] = ob.y_o + uy[mask] * deff
        sm = pts.copy()
        sm[1:-1] = 0.25 * pts[:-2] + 0.5 * pts[1:-1] + 0.25 * pts[2:]
        pts = sm
        pts[0], pts[-1] = p0, p1
        if not moved:
            break
    return pts


def _dense_reference(problem: PlanProblem, nsub: int = 24) -> dict:
    """Dense obstacle-aware reference polyline and its arc geometry."""
    from scipy.interpolate import CubicSpline

    cs = problem.constraints
    M = problem.n_seg
    if problem.mode == "cruise":
        wpts = problem.waypoints
    else:
        frac = np.linspace(0.0, 1.0, M + 1)[:, None]
        wpts = problem.waypoints[0] + frac * (
            problem.waypoints[1] - problem.waypoints[0]
        )
    chords = np.maximum(
        np.linalg.norm(np.diff(wpts, axis=0), axis=1), 1e-3
    )
    s = np.concatenate(([0.0], np.cumsum(chords)))

    def unit(v):
        n = np.linalg.norm(v)
        return v / n if n > 1e-9 else np.array([1.0, 0.0, 0.0])

    spl = CubicSpline(
        s,
        wpts,
        axis=0,
        bc_type=((1, unit(cs.start_state[1])), (1, unit(cs.end_state[1]))),
    )
    params = [
        np.linspace(s[m], s[m + 1], nsub + 1)[:-1] for m in range(M)
    ]
    params = np.concatenate(params + [s[-1:]])
    Q = _warp_clear(spl(params), problem)
    j_idx = np.arange(M + 1) * nsub
    steps = np.linalg.norm(np.diff(Q, axis=0), axis=1)
    arc = np.concatenate(([0.0], np.cumsum(np.maximum(steps, 1e-9))))
    tang = np.gradient(Q, arc, axis=0)
    tang /= np.maximum(np.linalg.norm(tang, axis=1, keepdims=True), 1e-9)
    curv = np.gradient(tang, arc, axis=0)
    dcurv = np.gradient(curv, arc, axis=0)
    return {
        "wpts": wpts, "Q": Q, "arc": arc, "tang": tang,
        "curv": curv, "dcurv": dcurv, "j_idx": j_idx,
    }


def _seed_vector(assembled: AssembledNlp) -> np.ndarray:
    """Seed in scaled units from the dense reference polyline.

    The polyline is traversed at the target ground speed; junction
    states and interior control points come from its tangents and
    curvature, so curved or detouring seeds start close to feasibility
    instead of cutting corners.
    """
    lay = assembled.layout
    problem = assembled.problem
    vg = problem.constraints.vg_target
    z = np.zeros(lay.n)
    ref = _dense_reference(problem)
    Q, arc = ref["Q"], ref["arc"]
    tang, curv, dcurv = ref["tang"], ref["curv"], ref["dcurv"]
    j_idx = ref["j_idx"]

    seg_arc = np.diff(arc[j_idx])
    durs = np.clip(seg_arc / vg, lay.t_min, lay.t_max)
    z[lay.i_dur] = durs

    # free endpoint jerks bend the first/last control points onto the
    # polyline; leaving them zero strands four collinear points whenever
    # the boundary acceleration is pinned at zero on a curved seed
    z[lay.i_jerk0] = vg**3 * dcurv[0]
    z[lay.i_jerkf] = vg**3 * dcurv[-1]
    for j in range(lay.M - 1):
        k = j_idx[j + 1]
        if lay.i_jpos[j] is not None:
            z[lay.i_jpos[j]] = Q[k]
        z[lay.i_jvel[j]] = vg * tang[k]
        z[lay.i_jacc[j]] = vg * vg * curv[k]
        z[lay.i_jjerk[j]] = vg**3 * dcurv[k]
    if lay.i_endz is not None:
        z[lay.i_endz] = problem.waypoints[-1][2]
    for m in range(lay.M):
        for q in range(lay.n_int):
            target = arc[j_idx[m]] + (4 + q) / lay.d * seg_arc[m]
            z[lay.i_int[m, q]] = [
                np.interp(target, arc, Q[:, ax]) for ax in range(3)
            ]
    return z / lay.scale


def seed_from_trajectory(
    assembled: AssembledNlp, traj: CompositeTrajectory, t_from: float
) -> np.ndarray:
    """Warm-start vector from the tail of an existing trajectory."""
    lay = assembled.layout
    t_from = float(np.clip(t_from, traj.t0, traj.tf - 1e-6))
    remaining = traj.tf - t_from
    durs = np.full(lay.M, remaining / lay.M)
    knots = t_from + np.concatenate(([0.0], np.cumsum(durs)))
    z = np.zeros(lay.n)
    z[lay.i_dur] = durs
    z[lay.i_jerk0] = traj.eval(knots[0], 3)
    z[lay.i_jerkf] = traj.eval(knots[-1], 3)
    if lay.i_endz is not None:
        z[lay.i_endz] = traj.eval(knots[-1])[2]
    for j in range(lay.M - 1):
        tj = knots[j + 1]
        if lay.i_jpos[j] is not None:
            z[lay.i_jpos[j]] = traj.eval(tj)
        z[lay.i_jvel[j]] = traj.eval(tj, 1)
        z[lay.i_jacc[j]] = traj.eval(tj, 2)
        z[lay.i_jjerk[j]] = traj.eval(tj, 3)
    for m in range(lay.M):
        for q in range(lay.n_int):
            tq = knots[m] + (4 + q) / lay.d * durs[m]
            z[lay.i_int[m, q]] = traj.eval(tq)
    return z / lay.scale


# ----------------------------------------------------------------------
def solve(
    assembled: AssembledNlp,
    z0: np.ndarray | None = None,
    opts: SolveOptions | None = None,
    warm: MultiplierState | None = None,
) -> tuple[CompositeTrajectory, SolveReport, MultiplierState]:
    """Run the augmented-Lagrangian solver and decode the trajectory."""
    if opts is None:
        opts = SolveOptions()
    if z0 is None:
        z0 = _seed_vector(assembled)
    z, report, mult = solve_augmented_lagrangian(
        assembled.nlp, z0, opts, warm
    )
    traj = assembled.decode(z)
    report.cost_terms = {
        "jerk": jerk_cost(traj),
        "time": time_cost(traj),
        "wind": wind_cost(traj, assembled.problem.wind),
    }
    report.z = z
    return traj, report, mult


# ----------------------------------------------------------------------
# Endpoint-state helpers
# ----------------------------------------------------------------------
def _track_ground_speed(va_ref, wind, track_xy):
    """Vg_target = Va_ref + wind projected on the track direction."""
    return va_ref + float(wind[:2] @ track_xy)


def glide_endpoint_states(
    start_pos,
    end_pos,
    va_ref: float,
    wind,
    airframe: Airframe,
    polar: SinkPolar,
    start_vel=None,
    start_acc=None,
):
    """(start_state, end_state, vg_target) for a glide leg.

    Velocities point along the track at the wind-adjusted ground speed
    with the polar sink; a measured start velocity/acceleration replaces
    the nominal one when replanning from flight.
    """
    start_pos = np.asarray(start_pos, float)
    end_pos = np.asarray(end_pos, float)
    wind = np.asarray(wind, float)
    track = end_pos[:2] - start_pos[:2]
    dist = np.linalg.norm(track)
    if dist < 1e-6:
        raise ValueError("glide start and end coincide in the plane")
    track = track / dist
    vg = _track_ground_speed(va_ref, wind, track)
    if vg <= 1.0:
        raise ValueError(
            f"headwind leaves no usable ground speed (vg={vg:.2f} m/s)"
        )
    vz = sink_rate(polar, airframe, va_ref, 0.0)
    vel_nom = np.array([track[0] * vg, track[1] * vg, -vz])
    start = np.zeros((3, 3))
    start[0] = start_pos
    start[1] = vel_nom if start_vel is None else np.asarray(start_vel, float)
    start[2] = 0.0 if start_acc is None else np.asarray(start_acc, float)
    end = np.zeros((3, 3))
    end[0] = end_pos
    end[1] = vel_nom
    return start, end, vg


def cruise_endpoint_states(
    start_pose: dubins.Pose2D,
    end_pose: dubins.Pose2D,
    z_start: float,
    z_end: float,
    va_ref: float,
    wind,
):
    """Level endpoint states for a cruise leg between two poses."""
    wind = np.asarray(wind, float)
    track = np.array([
        math.cos(start_pose.heading), math.sin(start_pose.heading)
    ])
    vg_s = _track_ground_speed(va_ref, wind, track)
    track_e = np.array([
        math.cos(end_pose.heading), math.sin(end_pose.heading)
    ])
    vg_e = _track_ground_speed(va_ref, wind, track_e)
    start = np.zeros((3, 3))
    start[0] = [start_pose.x, start_pose.y, z_start]
    start[1] = [track[0] * vg_s, track[1] * vg_s, 0.0]
    end = np.zeros((3, 3))
    end[0] = [end_pose.x, end_pose.y, z_end]
    end[1] = [track_e[0] * vg_e, track_e[1] * vg_e, 0.0]
    vg_mid = 0.5 * (vg_s + vg_e)
    return start, end, vg_mid


def default_constraints(
    va_ref: float,
    vg_target: float,
    start_state,
    end_state,
    *,
    phi_max: float = math.radians(30.0),
    speed_slack: float = 1.2,
    vz_band: float = 0.5,
    d_safe: float = 20.0,
    g: float = 9.81,
) -> ConstraintSet:
    """ConstraintSet with the coordinated-turn heading-rate limit."""
    omega_max = g * math.tan(phi_max) / max(va_ref, 1.0)
    return ConstraintSet(
        omega_max=omega_max,
        vg_target=vg_target,
        xi=2.0 * vg_target * speed_slack,
        vz_band=vz_band,
        d_safe=d_safe,
        start_state=start_state,
        end_state=end_state,
    )


def dubins_seed_waypoints(
    start_pose: dubins.Pose2D,
    end_pose: dubins.Pose2D,
    z_start: float,
    z_end: float,
    r_min: float,
    n: int = 8,
) -> np.ndarray:
    """Waypoints (n, 3) sampled on the shortest Dubins path.

    Altitude interpolates linearly with arc length between the leg
    endpoints.
    """
    path = dubins.shortest_path(start_pose, end_pose, r_min)
    poses = dubins.sample(path, start_pose, n)
    frac = np.linspace(0.0, 1.0, n)
    return np.array([
        [p.x, p.y, z_start + f * (z_end - z_start)]
        for p, f in zip(poses, frac)
    ])


# ----------------------------------------------------------------------
def plan_glide(
    problem: PlanProblem,
    opts: SolveOptions | None = None,
    z0: np.ndarray | None = None,
    warm: MultiplierState | None = None,
):
    """Optimize a glide leg; terminal altitude is free.

    Returns (trajectory, report, multiplier state). Raises
    PlanInfeasibleError if the solver cannot meet the feasibility
    tolerance from a cold start.
    """
    if problem.mode != "glide":
        raise ValueError("plan_glide expects a glide-mode problem")
    if problem.constraints is None:
        start, end, vg = glide_endpoint_states(
            problem.waypoints[0],
            problem.waypoints[1],
            problem.va_ref,
            problem.wind,
            problem.airframe,
            problem.polar,
        )
        problem.constraints = default_constraints(
            problem.va_ref, vg, start, end,
            speed_slack=problem.speed_slack,
        )
        if problem.obstacles:
            # obstacle margins that overlap an endpoint force a detour
            # from the first instant, so the nominal boundary velocity
            # must follow the detoured reference tangent, not the track
            ref = _dense_reference(problem)
            for row, k in ((0, 0), (1, len(ref["tang"]) - 1)):
                state = problem.constraints.start_state if row == 0 \
                    else problem.constraints.end_state
                v_xy = np.linalg.norm(state[1, :2])
                t_xy = ref["tang"][k][:2]
                nrm = np.linalg.norm(t_xy)
                if nrm > 1e-9:
                    state[1, :2] = v_xy * t_xy / nrm
    assembled = assemble_nlp(problem)
    traj, report, mult = solve(assembled, z0, opts, warm)
    if not report.converged:
        worst = max(
            report.violation_by_family,
            key=lambda k: report.violation_by_family[k],
            default="",
        )
        raise PlanInfeasibleError(
            f"glide plan infeasible: worst family "
            f"{worst!r} at {report.max_violation:.2e}",
            family=worst,
            report=report,
        )
    return traj, report, mult


def plan_cruise(
    problem: PlanProblem,
    opts: SolveOptions | None = None,
    z0: np.ndarray | None = None,
    warm: MultiplierState | None = None,
):
    """Optimize a cruise leg through its seed waypoints."""
    if problem.mode != "cruise":
        raise ValueError("plan_cruise expects a cruise-mode problem")
    if problem.constraints is None:
        raise ValueError(
            "cruise problems need explicit constraints; build them with "
            "cruise_endpoint_states + default_constraints"
        )
    assembled = assemble_nlp(problem)
    traj, report, mult = solve(assembled, z0, opts, warm)
    if not report.converged:
        worst = max(
            report.violation_by_family,
            key=lambda k: report.violation_by_family[k],
            default="",
        )
        raise PlanInfeasibleError(
            f"cruise plan infeasible: worst family "
            f"{worst!r} at {report.max_violation:.2e}",
            family=worst,
            report=report,
        )
    return traj, report, mult


def replan(
    current_state,
    problem: PlanProblem,
    wind,
    previous: CompositeTrajectory,
    t_now: float,
    opts: SolveOptions | None = None,
    warm: MultiplierState | None = None,
):
    """Re-solve a glide from the current flight state.

    Seeds from the time-shifted previous solution and keeps the
    terminal altitude free. States within the tracking deadband of the
    previous trajectory (and wind within gust scale of the planning
    wind) keep the previous solution: re-solving from every small
    tracking error re-anchors the timeline onto the error and lets the
    arrival time drift. On solver failure the previous trajectory is
    returned unchanged with the report flagging the earliest violated
    family.
    """
    pos = np.asarray(current_state.x, float)
    vel = np.asarray(current_state.x_dot, float)
    acc = np.asarray(current_state.x_ddot, float)
    wind = np.asarray(wind, float)

    # fixed point: state on the previous trajectory and wind unchanged
    # means the previous solution is still the optimum; re-solving
    # would only re-knot it
    if previous.t0 <= t_now < previous.tf - 1e-6:
        same = (
            float(np.max(np.abs(pos - previous.eval(t_now)))) <= 0.75
            and float(np.max(np.abs(vel - previous.eval(t_now, 1)))) <= 0.75
            and float(np.max(np.abs(acc - previous.eval(t_now, 2)))) <= 1.5
            and float(np.max(np.abs(wind - problem.wind))) <= 0.3
        )
        if same:
            report = SolveReport(
                converged=True,
                max_violation=0.0,
                cost=np.nan,
                message="fixed point: previous trajectory kept",
            )
            report.cost_terms = {
                "jerk": jerk_cost(previous),
                "time": time_cost(previous),
                "wind": wind_cost(previous, problem.wind),
            }
            return previous, report, warm

    start, end, vg = glide_endpoint_states(
        pos,
        problem.waypoints[1],
        problem.va_ref,
        wind,
        problem.airframe,
        problem.polar,
        start_vel=vel,
        start_acc=acc,
    )
    base = problem.constraints
    cs = default_constraints(problem.va_ref, vg, start, end,
                             speed_slack=problem.speed_slack,
                             d_safe=base.d_safe if base else 20.0,
                             vz_band=base.vz_band if base else 0.5)
    # keep re-timing incremental: each replan may stretch or shrink the
    # remaining schedule by at most 30%, so repeated replans converge on
    # a new optimum after a wind change instead of drifting the arrival
    d0 = max(previous.tf - t_now, 1.0) / problem.n_seg
    new_problem = replace(
        problem,
        waypoints=np.vstack([pos, problem.waypoints[1]]),
        wind=wind,
        constraints=cs,
        t_start=t_now,
        grace=0.18,
        dur_bounds=(0.7 * d0, 1.3 * d0),
    )
    assembled = assemble_nlp(new_problem)
    z0 = seed_from_trajectory(assembled, previous, t_now)
    if opts is None:
        opts = SolveOptions(max_outer=6, inner_maxiter=60)
    traj, report, mult = solve(assembled, z0, opts, warm)
    if not report.converged:
        return previous, report, warm if warm is not None else mult
    return traj, report, mult


# ----------------------------------------------------------------------
def verify_trajectory(
    problem: PlanProblem, traj: CompositeTrajectory, n: int = 1000
) -> dict:
    """Dense-sample constraint check; returns worst violation per family.

    Values are in natural units (rad/s for heading rate, m/s for the
    speed and sink bands after linearization, m for obstacle clearance);
    non-positive entries mean satisfied.
    """
    cs = problem.constraints
    ts = np.linspace(traj.t0, traj.tf, n)
    vel = traj.eval(ts, 1)
    acc = traj.eval(ts, 2)
    den = vel[:, 0] ** 2 + vel[:, 1] ** 2
    num = vel[:, 0] * acc[:, 1] - acc[:, 0] * vel[:, 1]
    omega = num / np.maximum(den, 1e-9)
    out = {}
    out["heading_rate"] = float(np.max(np.abs(omega)) - cs.omega_max)
    vg = np.sqrt(den)
    lo = math.sqrt(max(cs.vg_target**2 - cs.xi, 0.0))
    hi = math.sqrt(cs.vg_target**2 + cs.xi)
    out["speed_band"] = float(max(np.max(vg - hi), np.max(lo - vg)))
    if problem.mode == "glide":
        af, polar = problem.airframe, problem.polar
        cl = af.lift_coefficient(problem.va_ref)
        tan_phi = problem.va_ref * omega / af.g
        vz_nom = problem.va_ref * (
            polar.P / cl + polar.B * cl * (1.0 + tan_phi**2)
        )
        dev = np.abs(-vel[:, 2] - vz_nom)
        out["sink_band"] = float(np.max(dev) - cs.vz_band)
    if problem.obstacles:
        pos = traj.eval(ts)
        worst = -np.inf
        for ob in problem.obstacles:
            deff = cs.d_safe + (
                2.0 * max(ob.sigma_x, ob.sigma_y) if ob.hard else 0.0
            )
            dist = np.hypot(pos[:, 0] - ob.x_o, pos[:, 1] - ob.y_o)
            worst = max(worst, float(np.max(deff - dist)))
        out["obstacle"] = worst
    return out
