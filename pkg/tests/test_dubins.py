"""Shortest bounded-curvature paths.

The oracle reconstructs every candidate word from raw circle-tangent
geometry in the world frame (tangent lines between turn circles, arc
angles respecting the turn sense), which shares no code or frame
normalization with the implementation under test.
"""

import math

import numpy as np
import pytest

from glideplan.dubins import (
    DubinsPath,
    Pose2D,
    min_turn_radius,
    pose_at,
    sample,
    shortest_path,
    solve_word,
)

TWO_PI = 2.0 * math.pi


def mod2pi(a):
    return a - TWO_PI * math.floor(a / TWO_PI)


def wrap(a):
    return math.atan2(math.sin(a), math.cos(a))


def left_center(p: Pose2D, r: float):
    return (p.x - r * math.sin(p.heading), p.y + r * math.cos(p.heading))


def right_center(p: Pose2D, r: float):
    return (p.x + r * math.sin(p.heading), p.y - r * math.cos(p.heading))


def oracle_words(start: Pose2D, goal: Pose2D, r: float):
    """Candidate lengths per word from circle-tangent constructions.

    CSC words use the tangent line between the two turn circles; CCC
    words place the middle circle at both feasible positions and report
    both, since only the turn senses are fixed by the word.
    """
    out: dict[str, list[float]] = {}
    hs, hg = start.heading, goal.heading

    def csc(word):
        c1 = (left_center if word[0] == "L" else right_center)(start, r)
        c2 = (left_center if word[2] == "L" else right_center)(goal, r)
        dx, dy = c2[0] - c1[0], c2[1] - c1[1]
        D = math.hypot(dx, dy)
        if D < 1e-12:
            return
        phi = math.atan2(dy, dx)
        if word[0] == word[2]:
            psi, p = phi, D
        else:
            if D < 2.0 * r:
                return
            p = math.sqrt(D * D - 4.0 * r * r)
            shift = math.asin(2.0 * r / D)
            psi = phi + shift if word[0] == "L" else phi - shift
        a1 = mod2pi(psi - hs) if word[0] == "L" else mod2pi(hs - psi)
        a2 = mod2pi(hg - psi) if word[2] == "L" else mod2pi(psi - hg)
        out.setdefault(word, []).append(r * (a1 + a2) + p)

    def ccc(word):
        outer = left_center if word[0] == "L" else right_center
        c1 = outer(start, r)
        c2 = outer(goal, r)
        dx, dy = c2[0] - c1[0], c2[1] - c1[1]
        D = math.hypot(dx, dy)
        if D < 1e-12 or D > 4.0 * r:
            return
        phi = math.atan2(dy, dx)
        theta = math.acos(D / (4.0 * r))
        for sgn in (1.0, -1.0):
            ang = phi + sgn * theta
            c3 = (c1[0] + 2 * r * math.cos(ang), c1[1] + 2 * r * math.sin(ang))
            a_m1 = math.atan2(c3[1] - c1[1], c3[0] - c1[0])
            a_m2 = math.atan2(c3[1] - c2[1], c3[0] - c2[0])
            b_m1 = a_m1 + math.pi
            b_m2 = math.atan2(
                (c2[1] + c3[1]) / 2 - c3[1], (c2[0] + c3[0]) / 2 - c3[0]
            )
            if word[0] == "L":
                a_s, a_g = hs - 0.5 * math.pi, hg - 0.5 * math.pi
                arc1 = mod2pi(a_m1 - a_s)
                arc2 = mod2pi(b_m1 - b_m2)
                arc3 = mod2pi(a_g - a_m2)
            else:
                a_s, a_g = hs + 0.5 * math.pi, hg + 0.5 * math.pi
                arc1 = mod2pi(a_s - a_m1)
                arc2 = mod2pi(b_m2 - b_m1)
                arc3 = mod2pi(a_m2 - a_g)
            out.setdefault(word, []).append(r * (arc1 + arc2 + arc3))

    for w in ("LSL", "RSR", "LSR", "RSL"):
        csc(w)
    for w in ("RLR", "LRL"):
        ccc(w)
    return out


def random_pair(rng, r_lo=4.0, r_hi=30.0):
    x = rng.uniform(-150, 150, size=4)
    h = rng.uniform(-math.pi, math.pi, size=2)
    r = float(rng.uniform(r_lo, r_hi))
    return (
        Pose2D(x[0], x[1], h[0]),
        Pose2D(x[2], x[3], h[1]),
        r,
    )


# ----------------------------------------------------------------------
# optimality against the oracle
# ----------------------------------------------------------------------
def test_shortest_beats_every_oracle_candidate(rng):
    for _ in range(1000):
        start, goal, r = random_pair(rng)
        best = shortest_path(start, goal, r)
        cands = oracle_words(start, goal, r)
        flat = [v for vs in cands.values() for v in vs]
        assert flat
        for v in flat:
            assert best.length <= v + 1e-9
        assert best.length >= min(flat) - 1e-9


def test_per_word_lengths_match_oracle(rng):
    for _ in range(300):
        start, goal, r = random_pair(rng)
        cands = oracle_words(start, goal, r)
        for word, vals in cands.items():
            got = solve_word(word, start, goal, r)
            if got is None:
                continue
            assert min(abs(got.length - v) for v in vals) <= 1e-9, word


def test_collinear_straight_exact():
    r = 10.0
    best = shortest_path(Pose2D(0, 0, 0), Pose2D(4 * r, 0, 0), r)
    assert best.length == pytest.approx(4 * r, abs=1e-12)
    assert best.word[1] == "S"


def test_turnaround_in_place():
    # same position, reversed heading: three arcs of pi/3, 5pi/3, pi/3
    r = 10.0
    best = shortest_path(Pose2D(0, 0, 0), Pose2D(0, 0, math.pi), r)
    assert best.word in ("RLR", "LRL")
    assert best.length == pytest.approx(r * 7 * math.pi / 3, abs=1e-9)


def test_endpoint_pose_reached(rng):
    for _ in range(300):
        start, goal, r = random_pair(rng)
        path = shortest_path(start, goal, r)
        end = pose_at(path, start, path.length)
        assert math.hypot(end.x - goal.x, end.y - goal.y) < 1e-9
        assert abs(wrap(end.heading - goal.heading)) < 1e-9


def test_mirror_symmetry(rng):
    for _ in range(200):
        start, goal, r = random_pair(rng)
        m_start = Pose2D(start.x, -start.y, -start.heading)
        m_goal = Pose2D(goal.x, -goal.y, -goal.heading)
        a = shortest_path(start, goal, r)
        b = shortest_path(m_start, m_goal, r)
        assert abs(a.length - b.length) <= 1e-9


# ----------------------------------------------------------------------
# walking along the path
# ----------------------------------------------------------------------
def test_arc_length_parameterization(rng):
    start, goal, r = Pose2D(0, 0, 0.3), Pose2D(120, -60, -2.0), 12.0
    path = shortest_path(start, goal, r)
    h = 1e-4
    for s in rng.uniform(h, path.length - h, size=200):
        a = pose_at(path, start, float(s) - h)
        b = pose_at(path, start, float(s) + h)
        assert math.hypot(b.x - a.x, b.y - a.y) == pytest.approx(
            2 * h, rel=1e-6
        )


def test_heading_matches_tangent(rng):
    start, goal, r = Pose2D(5, -3, 1.1), Pose2D(-90, 70, 2.8), 15.0
    path = shortest_path(start, goal, r)
    h = 1e-4
    for s in rng.uniform(h, path.length - h, size=200):
        mid = pose_at(path, start, float(s))
        a = pose_at(path, start, float(s) - h)
        b = pose_at(path, start, float(s) + h)
        tangent = math.atan2(b.y - a.y, b.x - a.x)
        assert abs(wrap(tangent - mid.heading)) < 1e-6


def test_sample_endpoints_and_spacing():
    start, goal, r = Pose2D(0, 0, 0), Pose2D(80, 40, 1.0), 10.0
    path = shortest_path(start, goal, r)
    poses = sample(path, start, n=8)
    assert len(poses) == 8
    assert math.hypot(poses[0].x - start.x, poses[0].y - start.y) < 1e-9
    assert math.hypot(poses[-1].x - goal.x, poses[-1].y - goal.y) < 1e-9
    assert abs(wrap(poses[-1].heading - goal.heading)) < 1e-9
    # each sample sits exactly at its share of the arc length
    for k, p in enumerate(poses):
        q = pose_at(path, start, k * path.length / 7.0)
        assert math.hypot(p.x - q.x, p.y - q.y) <= 1e-6 * path.length


def test_sample_needs_two_points():
    path = shortest_path(Pose2D(0, 0, 0), Pose2D(50, 0, 0), 10.0)
    with pytest.raises(ValueError):
        sample(path, Pose2D(0, 0, 0), n=1)


def test_pose_at_range_errors():
    start = Pose2D(0, 0, 0)
    path = shortest_path(start, Pose2D(50, 0, 0), 10.0)
    with pytest.raises(ValueError):
        pose_at(path, start, -1.0)
    with pytest.raises(ValueError):
        pose_at(path, start, path.length + 1.0)


# ----------------------------------------------------------------------
# construction and helpers
# ----------------------------------------------------------------------
def test_path_validation():
    with pytest.raises(ValueError):
        DubinsPath("XSL", 1.0, 1.0, 1.0, 10.0)
    with pytest.raises(ValueError):
        DubinsPath("LSL", -0.1, 1.0, 1.0, 10.0)
    with pytest.raises(ValueError):
        DubinsPath("LSL", 1.0, 1.0, 1.0, 0.0)


def test_segment_lengths_sum():
    path = shortest_path(Pose2D(0, 0, 1.0), Pose2D(70, -30, -0.5), 12.0)
    assert sum(path.segment_lengths) == pytest.approx(path.length, abs=1e-12)


def test_min_turn_radius():
    v, phi = 15.0, math.radians(30.0)
    assert min_turn_radius(v, phi) == pytest.approx(
        v * v / (9.81 * math.tan(phi)), rel=1e-12
    )
    with pytest.raises(ValueError):
        min_turn_radius(0.0, phi)
    with pytest.raises(ValueError):
        min_turn_radius(v, 0.0)
