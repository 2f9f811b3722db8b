"""Steady-glide aerodynamics and the energy pipeline.

Oracles: the glide-angle quadratic residual, dense grid searches for
the optimal airspeed and best glide ratio, and Monte Carlo recovery
for the polar fit and the smoothed derivative.
"""

import math

import numpy as np
import pytest

from glideplan.aero import (
    Airframe,
    EnergySample,
    SinkPolar,
    StreamingDerivative,
    energy_rate,
    fit_polar,
    glide_sin_gamma,
    max_glide_ratio,
    netto,
    optimal_airspeed,
    polar_from_airframe,
    sg_derivative,
    sink_rate,
    steady_sink_samples,
)


def quadratic_residual(af: Airframe, va: float, sg: float) -> float:
    """Residual of the glide-angle balance m g sin^2 - q pi ARe sin - eta."""
    q = 0.5 * af.rho * va * va * af.S
    pare = math.pi * af.AR * af.e
    eta = (q * q * pare * af.C_D0 + (af.m * af.g) ** 2) / (af.m * af.g)
    return af.m * af.g * sg * sg - q * pare * sg - eta


# ----------------------------------------------------------------------
# glide angle / optimal speed / glide ratio
# ----------------------------------------------------------------------
def test_glide_angle_satisfies_quadratic(airframe):
    for va in np.linspace(8.0, 20.0, 25):
        sg = glide_sin_gamma(airframe, float(va))
        assert abs(quadratic_residual(airframe, float(va), sg)) < 1e-9


def test_glide_angle_negative(airframe):
    for va in (8.0, 12.0, 20.0):
        assert glide_sin_gamma(airframe, va) < 0.0


def test_glide_angle_shallowest_at_optimal_speed(airframe):
    grid = np.linspace(6.0, 25.0, 400)
    mags = [abs(glide_sin_gamma(airframe, float(v))) for v in grid]
    v_best = grid[int(np.argmin(mags))]
    assert abs(v_best - optimal_airspeed(airframe)) < 0.1


def test_optimal_airspeed_grid_argmin(airframe):
    grid = np.arange(5.0, 30.0, 0.001)
    mags = [abs(glide_sin_gamma(airframe, float(v))) for v in grid]
    v_grid = float(grid[int(np.argmin(mags))])
    assert abs(optimal_airspeed(airframe) - v_grid) <= 0.05


def test_optimal_airspeed_mass_scaling(airframe):
    heavy = Airframe(
        m=2 * airframe.m, S=airframe.S, AR=airframe.AR,
        e=airframe.e, C_D0=airframe.C_D0,
    )
    ratio = optimal_airspeed(heavy) / optimal_airspeed(airframe)
    assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-9)


def test_max_glide_ratio_grid(airframe):
    want = max_glide_ratio(airframe)
    grid = np.linspace(6.0, 25.0, 2000)
    best = 0.0
    for v in grid:
        sg = glide_sin_gamma(airframe, float(v))
        best = max(best, math.sqrt(1.0 - sg * sg) / (-sg))
    assert abs(want - best) / best < 0.005


def test_max_glide_ratio_drag_scaling(airframe):
    draggy = Airframe(
        m=airframe.m, S=airframe.S, AR=airframe.AR,
        e=airframe.e, C_D0=4 * airframe.C_D0,
    )
    assert max_glide_ratio(draggy) == pytest.approx(
        0.5 * max_glide_ratio(airframe), rel=1e-9
    )


def test_max_glide_ratio_consistent_with_glide_angle(airframe):
    vstar = optimal_airspeed(airframe)
    sg = glide_sin_gamma(airframe, vstar)
    alt = -1.0 / math.tan(math.asin(sg))
    assert abs(max_glide_ratio(airframe) - alt) / alt < 0.005


# ----------------------------------------------------------------------
# sink polar
# ----------------------------------------------------------------------
def test_sink_rate_bank_monotone(airframe, polar):
    flat = sink_rate(polar, airframe, 12.0, 0.0)
    banked = sink_rate(polar, airframe, 12.0, math.radians(30.0))
    steeper = sink_rate(polar, airframe, 12.0, math.radians(45.0))
    assert flat < banked < steeper


def test_sink_rate_bank_domain(airframe, polar):
    with pytest.raises(ValueError):
        sink_rate(polar, airframe, 12.0, 0.51 * math.pi)


def test_polar_tangent_point_at_optimal_speed(airframe, polar):
    # the origin tangent of the polar touches where Vz/Va is least,
    # which is the best-glide airspeed
    grid = np.linspace(8.0, 18.0, 2001)
    ratio = [sink_rate(polar, airframe, float(v), 0.0) / v for v in grid]
    v_tan = float(grid[int(np.argmin(ratio))])
    vstar = optimal_airspeed(airframe)
    assert abs(v_tan - vstar) / vstar < 0.02
    s_tan = sink_rate(polar, airframe, v_tan, 0.0)
    s_star = sink_rate(polar, airframe, vstar, 0.0)
    assert abs(s_star - s_tan) / s_tan < 0.02


def test_fit_polar_exact_on_model_data(airframe):
    truth = SinkPolar(P=0.03, B=0.05)
    rows = []
    for va in np.linspace(8, 18, 12):
        for phi in (0.0, 0.3):
            rows.append(
                (va, phi, sink_rate(truth, airframe, float(va), phi))
            )
    fitted, rms = fit_polar(rows, airframe)
    assert fitted.P == pytest.approx(truth.P, rel=1e-9)
    assert fitted.B == pytest.approx(truth.B, rel=1e-9)
    assert rms < 1e-10


def test_fit_polar_noise_recovery(airframe):
    truth = SinkPolar(P=0.03, B=0.05)
    rng = np.random.default_rng(7)
    errs = []
    va = np.linspace(9.0, 18.0, 40)
    clean = np.array(
        [sink_rate(truth, airframe, float(v), 0.0) for v in va]
    )
    for _ in range(100):
        vz = clean + 0.05 * rng.standard_normal(40)
        fitted, _ = fit_polar(
            np.column_stack([va, np.zeros(40), vz]), airframe
        )
        errs.append(
            max(
                abs(fitted.P - truth.P) / truth.P,
                abs(fitted.B - truth.B) / truth.B,
            )
        )
    assert float(np.median(errs)) <= 0.05


def test_fit_polar_rank_deficiency(airframe):
    rows = [(12.0, 0.0, 1.0), (12.0, 0.0, 1.1), (12.0, 0.0, 0.9)]
    with pytest.raises(ValueError):
        fit_polar(rows, airframe)


def test_steady_samples_consistent_with_glide_angle(airframe):
    # wings-level rows of the balance sweep must agree with the
    # closed-form glide angle
    rows = steady_sink_samples(airframe, [9.0, 12.0, 15.0])
    for va, _phi, vz in rows:
        sg = glide_sin_gamma(airframe, float(va))
        assert vz == pytest.approx(-va * sg, rel=1e-9)


# ----------------------------------------------------------------------
# energy pipeline
# ----------------------------------------------------------------------
def test_energy_rate_level_flight():
    s = EnergySample(t=0.0, xz_dot=0.0, va=15.0, va_dot=0.0)
    assert energy_rate(s) == 0.0


def test_energy_rate_zoom_exchange():
    # climbing at exactly the rate the airspeed loss pays for
    g = 9.81
    va, va_dot = 12.0, -1.0
    s = EnergySample(t=0.0, xz_dot=-va * va_dot / g, va=va, va_dot=va_dot)
    assert energy_rate(s) == pytest.approx(0.0, abs=1e-12)


def test_netto_zero_on_polar(airframe, polar):
    # descending exactly at the polar sink with steady airspeed
    for va in (9.0, 12.0, 15.0):
        vz = sink_rate(polar, airframe, va, 0.0)
        s = EnergySample(t=0.0, xz_dot=-vz, va=va, va_dot=0.0)
        assert netto(s, polar, airframe) == pytest.approx(0.0, abs=1e-12)


def test_netto_reads_updraft(airframe, polar):
    va = optimal_airspeed(airframe)
    vz = sink_rate(polar, airframe, va, 0.0)
    s = EnergySample(t=0.0, xz_dot=-vz + 2.0, va=va, va_dot=0.0)
    assert netto(s, polar, airframe) == pytest.approx(2.0, abs=1e-12)


def test_netto_bank_corrected(airframe, polar):
    phi = math.radians(30.0)
    vz = sink_rate(polar, airframe, 12.0, phi)
    s = EnergySample(t=0.0, xz_dot=-vz, va=12.0, va_dot=0.0, phi=phi)
    assert netto(s, polar, airframe) == pytest.approx(0.0, abs=1e-12)


def test_bank_forms_agree(airframe, polar):
    # B CL / cos^2 equals B CL (1 + tan^2); the planner uses the
    # polynomial-friendly tangent form
    cl = airframe.lift_coefficient(12.0)
    for phi in (0.0, 0.2, 0.5, 1.0):
        a = polar.B * cl / math.cos(phi) ** 2
        b = polar.B * cl * (1.0 + math.tan(phi) ** 2)
        assert a == pytest.approx(b, rel=1e-12)


# ----------------------------------------------------------------------
# smoothed derivative
# ----------------------------------------------------------------------
def test_sg_exact_on_quadratic():
    t = np.arange(0, 5, 0.1)
    d = sg_derivative(t * t, 0.1, window=7, order=2)
    assert np.max(np.abs(d[3:-3] - 2 * t[3:-3])) < 1e-10


def test_sg_constant_series():
    d = sg_derivative(np.full(50, 3.0), 0.01)
    assert np.max(np.abs(d)) < 1e-10


def test_sg_parameter_errors():
    y = np.zeros(30)
    with pytest.raises(ValueError):
        sg_derivative(y, 0.1, window=8)
    with pytest.raises(ValueError):
        sg_derivative(y, 0.1, window=7, order=7)
    with pytest.raises(ValueError):
        sg_derivative(y[:5], 0.1, window=11)


def test_sg_beats_raw_differencing():
    rng = np.random.default_rng(11)
    t = np.arange(0, 10, 0.01)
    truth = 2 * np.pi * 0.5 * np.cos(2 * np.pi * 0.5 * t)
    wins = 0
    for _ in range(100):
        y = np.sin(2 * np.pi * 0.5 * t) + 0.05 * rng.standard_normal(
            t.size
        )
        d_sg = sg_derivative(y, 0.01)
        d_raw = np.gradient(y, 0.01)
        e_sg = math.sqrt(np.mean((d_sg[10:-10] - truth[10:-10]) ** 2))
        e_raw = math.sqrt(np.mean((d_raw[10:-10] - truth[10:-10]) ** 2))
        wins += e_sg < e_raw
    assert wins == 100


def test_streaming_derivative_linear_ramp():
    sd = StreamingDerivative(dt=0.1, window=7, order=2)
    out = [sd.push(0.5 * k * 0.1) for k in range(20)]
    assert all(v is None for v in out[:6])
    assert all(abs(v - 0.5) < 1e-10 for v in out[6:])


def test_streaming_matches_batch_center(rng):
    # streaming output k is the centered estimate at sample k - w//2
    y = np.cumsum(rng.standard_normal(60)) * 0.1
    batch = sg_derivative(y, 0.05, window=11, order=3)
    sd = StreamingDerivative(dt=0.05, window=11, order=3)
    outs = [sd.push(v) for v in y]
    for k in range(10, 60):
        assert outs[k] == pytest.approx(batch[k - 5], abs=1e-9)
