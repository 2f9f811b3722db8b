"""Steady-glide aerodynamics, sink polars and total-energy estimation.

Model summary. With a parabolic drag polar C_D = C_D0 + k C_L^2,
k = 1/(pi AR e), an unpowered steady glide at airspeed V_a satisfies a
quadratic in sin(gamma_a):

    m g sin^2(gamma_a) - (q S pi AR e) sin(gamma_a) - eta = 0,
    eta = ((q S)^2 pi AR e C_D0 + (m g)^2) / (m g),   q = 0.5 rho V_a^2.

The descending root gives the air-relative flight-path angle; expanding
it around the optimum yields the best-glide airspeed and the maximum
lift-to-drag ratio. Sink measurements are summarized by the two-term
polar

    V_z(V_a, phi) = V_a * (P / C_L + B * C_L / cos^2(phi)),

linear in (P, B) once divided by V_a, with C_L = 2 m g / (rho S V_a^2).
The total-energy rate and the netto (airmass) signal are

    Edot      = xdot_z + V_a * Vadot / g
    Edot_net  = Edot + V_z(V_a, phi)

so a glider flying exactly on its polar in still air reads netto zero,
and any nonzero netto is air motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import savgol_coeffs, savgol_filter

__all__ = [
    "Airframe",
    "SinkPolar",
    "EnergySample",
    "glide_sin_gamma",
    "optimal_airspeed",
    "max_glide_ratio",
    "sink_rate",
    "fit_polar",
    "steady_sink_samples",
    "polar_from_airframe",
    "energy_rate",
    "netto",
    "sg_derivative",
    "StreamingDerivative",
    "lift_slope",
    "alpha_trim_coefficients",
]

G_STD = 9.80665


@dataclass(frozen=True)
class Airframe:
    """Fixed-wing parameters for the point-mass glide model.

    m kg, S m^2, AR and e dimensionless, C_D0 dimensionless, rho kg/m^3.
    """

    m: float
    S: float
    AR: float
    e: float
    C_D0: float
    rho: float = 1.225
    g: float = 9.81

    def __post_init__(self):
        for name in ("m", "S", "AR", "e", "C_D0", "rho", "g"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"airframe parameter {name}={val!r} must be positive")
        if self.e > 1.2:
            raise ValueError(f"Oswald efficiency e={self.e} is implausible")

    @property
    def k_induced(self) -> float:
        """Induced-drag factor k = 1 / (pi AR e)."""
        return 1.0 / (math.pi * self.AR * self.e)

    def lift_coefficient(self, va: float) -> float:
        """Level-trim C_L = 2 m g / (rho S V_a^2)."""
        va = float(va)
        if va <= 0.0:
            raise ValueError("airspeed must be positive")
        return 2.0 * self.m * self.g / (self.rho * self.S * va * va)


@dataclass(frozen=True)
class SinkPolar:
    """Coefficients of V_z = V_a (P / C_L + B C_L / cos^2 phi)."""

    P: float
    B: float

    def __post_init__(self):
        if not (self.P > 0.0 and self.B > 0.0):
            raise ValueError("polar coefficients P, B must be positive")


@dataclass
class EnergySample:
    """One instant of the energy pipeline inputs."""

    t: float
    xz_dot: float
    va: float
    va_dot: float
    phi: float = 0.0


# ----------------------------------------------------------------------
# Steady glide
# ----------------------------------------------------------------------
def glide_sin_gamma(airframe: Airframe, va: float) -> float:
    """sin of the air-relative flight-path angle in unpowered glide.

    Returns the negative (descending) root of the steady-glide quadratic.
    The positive companion root is not physical for a glide and is
    discarded.
    """
    va = float(va)
    if va <= 0.0:
        raise ValueError("airspeed must be positive")
    af = airframe
    qS = 0.5 * af.rho * va * va * af.S
    pare = math.pi * af.AR * af.e
    mg = af.m * af.g
    disc = qS * qS * pare * (pare + 4.0 * af.C_D0) + 4.0 * mg * mg
    s = (qS * pare - math.sqrt(disc)) / (2.0 * mg)
    if not -1.0 < s < 0.0:
        raise ValueError(
            f"no physical glide solution at V_a={va:g} m/s (sin gamma={s:g})"
        )
    return s


def optimal_airspeed(airframe: Airframe) -> float:
    """Airspeed of shallowest glide (best V_z/V_a tangent)."""
    af = airframe
    pare = math.pi * af.AR * af.e
    num = 4.0 * (af.m * af.g) ** 2
    den = af.rho**2 * af.S**2 * af.C_D0 * (pare + 4.0 * af.C_D0)
    return (num / den) ** 0.25


def max_glide_ratio(airframe: Airframe) -> float:
    """Best lift-to-drag ratio, 0.5 sqrt(pi AR e / C_D0)."""
    return 0.5 * math.sqrt(math.pi * airframe.AR * airframe.e / airframe.C_D0)


# ----------------------------------------------------------------------
# Sink polar
# ----------------------------------------------------------------------
def sink_rate(
    polar: SinkPolar, airframe: Airframe, va: float, phi: float = 0.0
) -> float:
    """Polar sink rate, positive down, at airspeed va and bank phi."""
    if abs(phi) >= 0.5 * math.pi:
        raise ValueError("bank angle must satisfy |phi| < pi/2")
    cl = airframe.lift_coefficient(va)
    cphi = math.cos(phi)
    return va * (polar.P / cl + polar.B * cl / (cphi * cphi))


def fit_polar(
    samples: Iterable[Sequence[float]], airframe: Airframe
) -> tuple[SinkPolar, float]:
    """Least-squares (P, B) from (V_a, phi, V_z) samples.

    The model divided by V_a is linear in (P, B); the fit is a plain
    linear least squares. Returns the polar and the RMS residual of the
    predicted sink rate in m/s.
    """
    rows = [tuple(map(float, s)) for s in samples]
    if len(rows) < 2:
        raise ValueError("need at least two polar samples")
    va = np.array([r[0] for r in rows])
    phi = np.array([r[1] for r in rows])
    vz = np.array([r[2] for r in rows])
    if np.any(va <= 0.0):
        raise ValueError("airspeeds must be positive")
    if np.any(np.abs(phi) >= 0.5 * math.pi):
        raise ValueError("bank angles must satisfy |phi| < pi/2")
    cl = 2.0 * airframe.m * airframe.g / (airframe.rho * airframe.S * va**2)
    A = np.column_stack([1.0 / cl, cl / np.cos(phi) ** 2])
    y = vz / va
    sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < 2:
        raise ValueError(
            "polar samples are degenerate: need at least two distinct airspeeds"
        )
    P, B = float(sol[0]), float(sol[1])
    if P <= 0.0 or B <= 0.0:
        raise ValueError(f"fit produced non-physical polar P={P:g}, B={B:g}")
    polar = SinkPolar(P, B)
    pred = va * (A @ sol)
    rms = float(np.sqrt(np.mean((pred - vz) ** 2)))
    return polar, rms


def steady_sink_samples(
    airframe: Airframe,
    va_grid: Iterable[float],
    phi_grid: Iterable[float] = (0.0,),
) -> np.ndarray:
    """(V_a, phi, V_z) rows from the exact steady banked-glide balance.

    A banked unpowered glide needs C_L = 2 m g cos(gamma) / (rho S V_a^2
    cos(phi)); drag then fixes sin(gamma) = -D/(m g). Solved by a few
    fixed-point sweeps on gamma (converges fast, gamma is shallow).
    """
    rows = []
    af = airframe
    for va in va_grid:
        va = float(va)
        for phi in phi_grid:
            cphi = math.cos(float(phi))
            cg = 1.0
            for _ in range(30):
                cl = 2.0 * af.m * af.g * cg / (af.rho * af.S * va * va * cphi)
                cd = af.C_D0 + af.k_induced * cl * cl
                sg = -0.5 * af.rho * va * va * af.S * cd / (af.m * af.g)
                cg_next = math.sqrt(max(1.0 - sg * sg, 0.0))
                if abs(cg_next - cg) < 1e-14:
                    cg = cg_next
                    break
                cg = cg_next
            rows.append((va, float(phi), -va * sg))
    return np.array(rows)


def polar_from_airframe(
    airframe: Airframe,
    va_min: float = 8.0,
    va_max: float = 18.0,
    n_va: int = 21,
    phi_max: float = 0.6,
    n_phi: int = 5,
) -> tuple[SinkPolar, float]:
    """Convenience: fit the sink polar to the airframe's own drag model."""
    va = np.linspace(va_min, va_max, n_va)
    phi = np.linspace(0.0, phi_max, n_phi)
    return fit_polar(steady_sink_samples(airframe, va, phi), airframe)


# ----------------------------------------------------------------------
# Energy pipeline
# ----------------------------------------------------------------------
def energy_rate(sample: EnergySample, g: float = 9.81) -> float:
    """Specific total-energy rate Edot = xdot_z + V_a Vadot / g, in m/s."""
    if sample.va <= 0.0:
        raise ValueError("airspeed must be positive")
    return sample.xz_dot + sample.va * sample.va_dot / g


def netto(
    sample: EnergySample,
    polar: SinkPolar,
    airframe: Airframe,
) -> float:
    """Airmass vertical motion: Edot compensated by the polar sink."""
    return energy_rate(sample, airframe.g) + sink_rate(
        polar, airframe, sample.va, sample.phi
    )


def sg_derivative(
    series,
    dt: float,
    window: int = 11,
    order: int = 3,
) -> np.ndarray:
    """Savitzky-Golay first derivative of a uniformly sampled series.

    Interior points use the centered least-squares fit; edges come from
    one-sided fits of the terminal windows (scipy's interp mode), so the
    output has the input's length. Exact for polynomials up to the fit
    order.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if dt <= 0.0:
        raise ValueError("sample spacing dt must be positive")
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and >= 3")
    if order >= window:
        raise ValueError("polynomial order must be below the window length")
    if y.size < window:
        raise ValueError(f"need at least {window} samples, got {y.size}")
    return savgol_filter(
        y, window_length=window, polyorder=order, deriv=1, delta=dt,
        mode="interp",
    )


class StreamingDerivative:
    """Causal Savitzky-Golay differentiator for live sensor streams.

    Keeps the last ``window`` samples and applies the fixed derivative
    stencil evaluated at the window center, so the estimate lags the
    newest sample by (window // 2) * dt but keeps the centered filter's
    noise rejection. Returns None until the buffer has filled.
    """

    def __init__(self, dt: float, window: int = 11, order: int = 3):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if window % 2 == 0 or window < 3:
            raise ValueError("window must be odd and >= 3")
        if order >= window:
            raise ValueError("order must be below window")
        # use="dot": weights dot directly with chronological samples
        self._w = savgol_coeffs(window, order, deriv=1, delta=dt, use="dot")
        self._buf = np.zeros(window)
        self._n = 0
        self.window = window
        self.delay = (window // 2) * dt

    def push(self, value: float):
        """Add a sample; return the delayed derivative or None."""
        self._buf = np.roll(self._buf, -1)
        self._buf[-1] = float(value)
        self._n += 1
        if self._n < self.window:
            return None
        return float(self._buf @ self._w)


# ----------------------------------------------------------------------
# Small helpers shared with the command extractor
# ----------------------------------------------------------------------
def lift_slope(airframe: Airframe) -> float:
    """Finite-wing lift-curve slope, 2 pi AR / (AR + 2), per radian."""
    return 2.0 * math.pi * airframe.AR / (airframe.AR + 2.0)

def alpha_trim_coefficients(airframe: Airframe) -> tuple[float, float]:
    """(a0, a1) of the trim incidence fit alpha = a0 + a1 / V_a^2.

    From lift balance C_L(V_a) = 2 m g / (rho S V_a^2) and a linear lift
    curve: a0 = 0, a1 = 2 m g / (rho S CLalpha).
    """
    a1 = 2.0 * airframe.m * airframe.g / (
        airframe.rho * airframe.S * lift_slope(airframe)
    )
    return 0.0, a1
