"""Bernstein-form curve algebra against independent oracles.

The evaluation oracle is the naive basis sum with binomial
coefficients; derivatives are checked against central finite
differences; everything else reduces to dense sampling.
"""

import math

import numpy as np
import pytest

from glideplan.bernstein import (
    BernsteinCurve,
    CompositeTrajectory,
    arc_length,
    heading_rate_fraction,
    product,
    segment_from_states,
    squared_speed,
)


def basis_sum(points, t0, tf, t):
    """Direct Σ p_i C(n,i) τ^i (1-τ)^(n-i), the textbook form."""
    points = np.atleast_2d(np.asarray(points, float).T).T
    n = points.shape[0] - 1
    tau = (t - t0) / (tf - t0)
    out = np.zeros(points.shape[1])
    for i in range(n + 1):
        out += points[i] * math.comb(n, i) * tau**i * (1 - tau) ** (n - i)
    return out


def random_curve(rng, degree, dim=1, t0=0.0, tf=1.0):
    pts = rng.standard_normal((degree + 1, dim)) * 3.0
    return BernsteinCurve(pts if dim > 1 else pts[:, 0], t0, tf)


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------
def test_eval_constant_curve():
    c = BernsteinCurve([3.0, 3.0, 3.0], 0.0, 2.0)
    for t in (0.0, 0.7, 2.0):
        assert c.eval(t) == pytest.approx(3.0, abs=1e-15)


def test_eval_cubic_symmetry():
    c = BernsteinCurve([0.0, 0.0, 1.0, 1.0], 0.0, 1.0)
    assert c.eval(0.5) == pytest.approx(0.5, abs=1e-15)


def test_eval_matches_basis_sum(rng):
    for _ in range(100):
        deg = int(rng.integers(1, 13))
        t0, dur = rng.uniform(-2, 2), rng.uniform(0.5, 5)
        c = random_curve(rng, deg, dim=2, t0=t0, tf=t0 + dur)
        for t in rng.uniform(t0, t0 + dur, 5):
            want = basis_sum(c.control_points, t0, t0 + dur, t)
            assert np.max(np.abs(c.eval(t) - want)) < 1e-12


def test_eval_outside_domain_raises():
    c = BernsteinCurve([0.0, 1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        c.eval(1.5)
    with pytest.raises(ValueError):
        c.eval(-0.5)


def test_endpoint_interpolation_exact(rng):
    for _ in range(20):
        c = random_curve(rng, int(rng.integers(1, 10)), dim=3)
        assert np.array_equal(c.eval(c.t0), c.control_points[0])
        assert np.array_equal(c.eval(c.tf), c.control_points[-1])


# ----------------------------------------------------------------------
# derivative
# ----------------------------------------------------------------------
def test_derivative_linear_slope():
    d = BernsteinCurve([0.0, 1.0], 0.0, 1.0).derivative()
    assert d.eval(0.3) == pytest.approx(1.0, abs=1e-15)


def test_derivative_constant_is_zero():
    d = BernsteinCurve([4.0, 4.0, 4.0], 0.0, 2.0).derivative()
    assert d.eval(1.0) == pytest.approx(0.0, abs=1e-15)


def test_derivative_matches_finite_differences(rng):
    # step grows with k: the 1/h^k round-off amplification would
    # otherwise swamp the 1e-6 relative target at k=3
    steps = {1: 1e-5, 2: 1e-4, 3: 2e-3}
    for _ in range(10):
        c = random_curve(rng, 6, dim=2, t0=0.0, tf=2.0)
        for k in (1, 2, 3):
            d = c.derivative(k)
            h = steps[k]
            for t in rng.uniform(0.3, 1.7, 4):
                if k == 1:
                    fd = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
                elif k == 2:
                    fd = (
                        c.eval(t + h) - 2 * c.eval(t) + c.eval(t - h)
                    ) / h**2
                else:
                    # O(h^4) stencil: exact for degree <= 6 curves
                    fd = (
                        c.eval(t - 3 * h)
                        - 8 * c.eval(t - 2 * h)
                        + 13 * c.eval(t - h)
                        - 13 * c.eval(t + h)
                        + 8 * c.eval(t + 2 * h)
                        - c.eval(t + 3 * h)
                    ) / (8 * h**3)
                got = d.eval(t)
                scale = max(1.0, float(np.max(np.abs(fd))))
                assert np.max(np.abs(got - fd)) / scale < 1e-6


def test_derivative_degree_error():
    c = BernsteinCurve([0.0, 1.0, 0.5], 0.0, 1.0)
    with pytest.raises(ValueError):
        c.derivative(3)


def test_derivative_linearity(rng):
    a = random_curve(rng, 5)
    b = random_curve(rng, 5)
    lhs = (a + b).derivative()
    rhs = a.derivative() + b.derivative()
    ts = np.linspace(0, 1, 30)
    for t in ts:
        assert abs(lhs.eval(t) - rhs.eval(t)) < 1e-12


# ----------------------------------------------------------------------
# product / elevation
# ----------------------------------------------------------------------
def test_product_constants():
    a = BernsteinCurve([2.0, 2.0], 0.0, 1.0)
    b = BernsteinCurve([3.0], 0.0, 1.0)
    p = product(a, b)
    assert p.eval(0.4) == pytest.approx(6.0, abs=1e-14)


def test_product_linear_squared_is_t_squared():
    a = BernsteinCurve([0.0, 1.0], 0.0, 1.0)
    p = product(a, a)
    for t in np.linspace(0, 1, 50):
        assert p.eval(t) == pytest.approx(t * t, abs=1e-12)


def test_product_with_zero_curve(rng):
    a = random_curve(rng, 4)
    z = BernsteinCurve([0.0, 0.0], 0.0, 1.0)
    p = product(a, z)
    assert np.max(np.abs(p.control_points)) == 0.0


def test_product_pointwise_exact(rng):
    for _ in range(10):
        a = random_curve(rng, int(rng.integers(1, 7)))
        b = random_curve(rng, int(rng.integers(1, 7)))
        p = product(a, b)
        for t in rng.uniform(0, 1, 10):
            assert abs(p.eval(t) - a.eval(t) * b.eval(t)) < 1e-10


def test_product_domain_mismatch():
    a = BernsteinCurve([0.0, 1.0], 0.0, 1.0)
    b = BernsteinCurve([0.0, 1.0], 0.0, 2.0)
    with pytest.raises(ValueError):
        product(a, b)


def test_elevation_identity_and_linear():
    c = BernsteinCurve([0.0, 1.0], 0.0, 1.0)
    assert np.array_equal(
        c.elevated(0).control_points, c.control_points
    )
    e = c.elevated(1)
    assert np.allclose(
        e.control_points.ravel(), [0.0, 0.5, 1.0], atol=1e-15
    )


def test_elevation_value_invariance(rng):
    for _ in range(10):
        c = random_curve(rng, int(rng.integers(1, 9)), dim=2)
        e = c.elevated(3)
        assert e.degree == c.degree + 3
        for t in rng.uniform(0, 1, 100):
            assert np.max(np.abs(e.eval(t) - c.eval(t))) < 1e-12


# ----------------------------------------------------------------------
# bounds
# ----------------------------------------------------------------------
def test_bounds_simple_cases():
    lo, hi = BernsteinCurve([0.0, 0.0, 1.0, 1.0], 0.0, 1.0).bounds()
    assert lo == pytest.approx(0.0) and hi == pytest.approx(1.0)
    lo, hi = BernsteinCurve([5.0], 0.0, 1.0).bounds()
    assert lo == pytest.approx(5.0) and hi == pytest.approx(5.0)


def test_convex_hull_containment(rng):
    for _ in range(10):
        c = random_curve(rng, int(rng.integers(2, 11)), dim=2)
        lo, hi = c.bounds()
        vals = np.array([c.eval(t) for t in np.linspace(0, 1, 1000)])
        assert np.all(vals >= lo - 1e-12)
        assert np.all(vals <= hi + 1e-12)


# ----------------------------------------------------------------------
# derived curves
# ----------------------------------------------------------------------
def test_squared_speed_straight_line():
    pts = np.linspace([0.0, 0.0], [30.0, 40.0], 5)
    c = BernsteinCurve(pts, 0.0, 10.0)
    s = squared_speed(c)
    assert s.eval(3.0) == pytest.approx(25.0, rel=1e-12)


def test_squared_speed_stationary():
    c = BernsteinCurve(np.ones((4, 2)), 0.0, 1.0)
    s = squared_speed(c)
    assert np.max(np.abs(s.control_points)) < 1e-12


def test_squared_speed_matches_finite_differences(rng):
    c = random_curve(rng, 7, dim=2, t0=0.0, tf=3.0)
    s = squared_speed(c)
    h = 1e-6
    for t in rng.uniform(0.2, 2.8, 20):
        v = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
        assert abs(s.eval(t) - float(v @ v)) < 1e-8 * max(1.0, v @ v)


def test_heading_rate_straight_line_zero():
    pts = np.linspace([0.0, 0.0], [10.0, 5.0], 6)
    num, _den = heading_rate_fraction(BernsteinCurve(pts, 0.0, 4.0))
    assert np.max(np.abs(num.control_points)) < 1e-10


def test_heading_rate_matches_atan2_rate(rng):
    c = random_curve(rng, 6, dim=2, t0=0.0, tf=5.0)
    num, den = heading_rate_fraction(c)
    h = 1e-5
    for t in rng.uniform(0.5, 4.5, 20):
        v = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
        if np.hypot(*v) < 0.5:
            continue
        # chord headings at t +/- h/2; their difference spans h
        psi_p = math.atan2(*(c.eval(t + h) - c.eval(t))[::-1])
        psi_m = math.atan2(*(c.eval(t) - c.eval(t - h))[::-1])
        dpsi = (psi_p - psi_m + math.pi) % (2 * math.pi) - math.pi
        fd = dpsi / h
        got = num.eval(t).item() / den.eval(t).item()
        assert abs(got - fd) < 1e-4


def test_heading_rate_mirror_negates_numerator(rng):
    pts = rng.standard_normal((7, 2))
    c = BernsteinCurve(pts, 0.0, 1.0)
    m = BernsteinCurve(pts * [1.0, -1.0], 0.0, 1.0)
    num_c, _ = heading_rate_fraction(c)
    num_m, _ = heading_rate_fraction(m)
    assert np.allclose(
        num_m.control_points, -num_c.control_points, atol=1e-12
    )


def test_arc_length_cases():
    straight = BernsteinCurve(
        np.linspace([0.0, 0.0], [3.0, 4.0], 4), 0.0, 1.0
    )
    assert arc_length(straight, 1e-9) == pytest.approx(5.0, abs=1e-8)
    still = BernsteinCurve(np.full((3, 2), 2.0), 0.0, 1.0)
    assert arc_length(still, 1e-9) == pytest.approx(0.0, abs=1e-12)


def test_arc_length_quarter_circle():
    # cubic Bezier circle approximation, radius 10
    k = 0.5522847498307936
    r = 10.0
    pts = np.array(
        [[r, 0.0], [r, k * r], [k * r, r], [0.0, r]]
    )
    c = BernsteinCurve(pts, 0.0, 1.0)
    got = arc_length(c, 1e-9)
    ts = np.linspace(0, 1, 100_000)
    poly = np.array([c.eval(t) for t in ts])
    ref = float(np.sum(np.hypot(*np.diff(poly, axis=0).T)))
    assert abs(got - ref) / ref < 5e-3
    assert got == pytest.approx(0.5 * math.pi * r, rel=5e-3)


# ----------------------------------------------------------------------
# composites
# ----------------------------------------------------------------------
def _random_jet(rng):
    return rng.standard_normal((4, 3))


def test_composite_c3_junctions(rng):
    # segments built from shared boundary jets are C^3 by construction
    jets = [_random_jet(rng) for _ in range(4)]
    knots = [0.0, 2.0, 3.5, 6.0]
    segs = []
    for j in range(3):
        interior = rng.standard_normal((2, 3))
        segs.append(
            segment_from_states(
                jets[j], jets[j + 1], interior, knots[j], knots[j + 1]
            )
        )
    traj = CompositeTrajectory(segs)
    errs = traj.continuity_errors(order=3)
    assert np.max(errs) < 1e-8


def test_composite_eval_and_derivative(rng):
    jets = [_random_jet(rng) for _ in range(3)]
    segs = [
        segment_from_states(
            jets[j], jets[j + 1], rng.standard_normal((2, 3)),
            float(j), float(j + 1),
        )
        for j in range(2)
    ]
    traj = CompositeTrajectory(segs)
    assert np.allclose(traj.eval(0.0), jets[0][0])
    assert np.allclose(traj.eval(2.0), jets[2][0])
    assert np.allclose(traj.eval(1.3, 1), segs[1].derivative().eval(1.3))


def test_composite_rejects_gaps(rng):
    a = BernsteinCurve(rng.standard_normal((4, 2)), 0.0, 1.0)
    b = BernsteinCurve(rng.standard_normal((4, 2)), 1.5, 2.0)
    with pytest.raises(ValueError):
        CompositeTrajectory([a, b])


def test_serialization_round_trip(rng):
    jets = [_random_jet(rng) for _ in range(3)]
    segs = [
        segment_from_states(
            jets[j], jets[j + 1], rng.standard_normal((2, 3)),
            float(2 * j), float(2 * j + 2),
        )
        for j in range(2)
    ]
    traj = CompositeTrajectory(segs)
    back = CompositeTrajectory.from_dict(traj.to_dict())
    for t in np.linspace(0.0, 4.0, 17):
        assert np.allclose(back.eval(t), traj.eval(t), atol=1e-14)
    rec = traj.segments[0].to_dict()
    assert set(rec) == {"degree", "t0", "tf", "control_points"}
