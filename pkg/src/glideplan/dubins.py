"""Shortest bounded-curvature (Dubins) paths between planar poses.

Used only to seed the cruise optimizer: the six candidate words are
evaluated in closed form, the shortest feasible one is kept, and a few
equally spaced poses along it become the initial waypoints of the
homotopy-friendly first guess.

Arc parameters (t, p, q) are stored in normalized units (path length
divided by the turn radius); metric length is (t + p + q) * r_min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose2D",
    "DubinsPath",
    "shortest_path",
    "sample",
    "pose_at",
    "min_turn_radius",
    "WORDS",
]

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")

_TWO_PI = 2.0 * math.pi


def _mod2pi(theta: float) -> float:
    """Wrap into [0, 2 pi)."""
    return theta - _TWO_PI * math.floor(theta / _TWO_PI)


def _wrap_pi(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    theta = math.fmod(theta, _TWO_PI)
    if theta > math.pi:
        theta -= _TWO_PI
    elif theta <= -math.pi:
        theta += _TWO_PI
    return theta


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; heading stored normalized into (-pi, pi]."""

    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", _wrap_pi(float(self.heading)))


@dataclass(frozen=True)
class DubinsPath:
    """One Dubins word with normalized segment lengths."""

    word: str
    t: float
    p: float
    q: float
    r_min: float

    def __post_init__(self):
        if self.word not in WORDS:
            raise ValueError(f"unknown Dubins word {self.word!r}")
        if min(self.t, self.p, self.q) < -1e-12:
            raise ValueError("segment lengths must be non-negative")
        if self.r_min <= 0.0:
            raise ValueError("turn radius must be positive")

    @property
    def length(self) -> float:
        return (self.t + self.p + self.q) * self.r_min

    @property
    def segment_lengths(self) -> tuple[float, float, float]:
        """Metric lengths of the three segments."""
        return (
            self.t * self.r_min,
            self.p * self.r_min,
            self.q * self.r_min,
        )


# ----------------------------------------------------------------------
# Per-word closed forms in the normalized frame: start at origin heading
# alpha, goal at (d, 0) heading beta, unit turn radius.
# ----------------------------------------------------------------------
def _lsl(alpha, beta, d):
    psq = 2.0 + d * d - 2.0 * math.cos(alpha - beta) + 2.0 * d * (
        math.sin(alpha) - math.sin(beta)
    )
    if psq < 0.0:
        return None
    tmp = math.atan2(
        math.cos(beta) - math.cos(alpha), d + math.sin(alpha) - math.sin(beta)
    )
    return (
        _mod2pi(-alpha + tmp),
        math.sqrt(max(psq, 0.0)),
        _mod2pi(beta - tmp),
    )


def _rsr(alpha, beta, d):
    psq = 2.0 + d * d - 2.0 * math.cos(alpha - beta) + 2.0 * d * (
        math.sin(beta) - math.sin(alpha)
    )
    if psq < 0.0:
        return None
    tmp = math.atan2(
        math.cos(alpha) - math.cos(beta), d - math.sin(alpha) + math.sin(beta)
    )
    return (
        _mod2pi(alpha - tmp),
        math.sqrt(max(psq, 0.0)),
        _mod2pi(-beta + tmp),
    )


def _lsr(alpha, beta, d):
    psq = -2.0 + d * d + 2.0 * math.cos(alpha - beta) + 2.0 * d * (
        math.sin(alpha) + math.sin(beta)
    )
    if psq < 0.0:
        return None
    p = math.sqrt(psq)
    tmp = math.atan2(
        -math.cos(alpha) - math.cos(beta), d + math.sin(alpha) + math.sin(beta)
    ) - math.atan2(-2.0, p)
    return (_mod2pi(-alpha + tmp), p, _mod2pi(-_mod2pi(beta) + tmp))


def _rsl(alpha, beta, d):
    psq = -2.0 + d * d + 2.0 * math.cos(alpha - beta) - 2.0 * d * (
        math.sin(alpha) + math.sin(beta)
    )
    if psq < 0.0:
        return None
    p = math.sqrt(psq)
    tmp = math.atan2(
        math.cos(alpha) + math.cos(beta), d - math.sin(alpha) - math.sin(beta)
    ) - math.atan2(2.0, p)
    return (_mod2pi(alpha - tmp), p, _mod2pi(beta - tmp))


def _rlr(alpha, beta, d):
    tmp = (
        6.0
        - d * d
        + 2.0 * math.cos(alpha - beta)
        + 2.0 * d * (math.sin(alpha) - math.sin(beta))
    ) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(_TWO_PI - math.acos(tmp))
    t = _mod2pi(
        alpha
        - math.atan2(
            math.cos(alpha) - math.cos(beta),
            d - math.sin(alpha) + math.sin(beta),
        )
        + p / 2.0
    )
    return (t, p, _mod2pi(alpha - beta - t + p))


def _lrl(alpha, beta, d):
    tmp = (
        6.0
        - d * d
        + 2.0 * math.cos(alpha - beta)
        + 2.0 * d * (math.sin(beta) - math.sin(alpha))
    ) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(_TWO_PI - math.acos(tmp))
    t = _mod2pi(
        -alpha
        - math.atan2(
            math.cos(alpha) - math.cos(beta),
            d + math.sin(alpha) - math.sin(beta),
        )
        + p / 2.0
    )
    return (t, p, _mod2pi(_mod2pi(beta) - alpha - t + p))


_WORD_FUNCS = {
    "LSL": _lsl,
    "RSR": _rsr,
    "LSR": _lsr,
    "RSL": _rsl,
    "RLR": _rlr,
    "LRL": _lrl,
}


def solve_word(word: str, start: Pose2D, goal: Pose2D, r_min: float):
    """One candidate word; returns a DubinsPath or None if infeasible."""
    if r_min <= 0.0:
        raise ValueError("turn radius must be positive")
    dx = goal.x - start.x
    dy = goal.y - start.y
    D = math.hypot(dx, dy)
    d = D / r_min
    theta = math.atan2(dy, dx) if D > 1e-12 else 0.0
    alpha = _mod2pi(start.heading - theta)
    beta = _mod2pi(goal.heading - theta)
    res = _WORD_FUNCS[word](alpha, beta, d)
    if res is None:
        return None
    t, p, q = res
    return DubinsPath(word, t, p, q, r_min)


def shortest_path(start: Pose2D, goal: Pose2D, r_min: float) -> DubinsPath:
    """Shortest of the six words; ties break by the WORDS ordering."""
    best = None
    for word in WORDS:
        cand = solve_word(word, start, goal, r_min)
        if cand is None:
            continue
        if best is None or cand.length < best.length - 1e-12:
            best = cand
    if best is None:
        raise ValueError("no feasible Dubins word (degenerate geometry)")
    return best


# ----------------------------------------------------------------------
# Walking along a solved path
# ----------------------------------------------------------------------
def _advance(pose: Pose2D, kind: str, s: float, r: float) -> Pose2D:
    """Move distance s along one segment type from pose."""
    h = pose.heading
    if kind == "S":
        return Pose2D(
            pose.x + s * math.cos(h), pose.y + s * math.sin(h), h
        )
    dpsi = s / r if kind == "L" else -s / r
    h2 = h + dpsi
    if kind == "L":
        cx = pose.x - r * math.sin(h)
        cy = pose.y + r * math.cos(h)
        return Pose2D(cx + r * math.sin(h2), cy - r * math.cos(h2), h2)
    cx = pose.x + r * math.sin(h)
    cy = pose.y - r * math.cos(h)
    return Pose2D(cx - r * math.sin(h2), cy + r * math.cos(h2), h2)


def pose_at(path: DubinsPath, start: Pose2D, s: float) -> Pose2D:
    """Pose after arc length s from the start of the path."""
    total = path.length
    if s < -1e-9 or s > total + 1e-9:
        raise ValueError(f"arc length {s:g} outside [0, {total:g}]")
    s = min(max(s, 0.0), total)
    pose = start
    for kind, seg_len in zip(path.word, path.segment_lengths):
        if s <= seg_len:
            return _advance(pose, kind, s, path.r_min)
        pose = _advance(pose, kind, seg_len, path.r_min)
        s -= seg_len
    return pose


def sample(path: DubinsPath, start: Pose2D, n: int = 8) -> list[Pose2D]:
    """n poses at equal arc-length spacing, endpoints included."""
    if n < 2:
        raise ValueError("need at least two sample poses")
    return [
        pose_at(path, start, si)
        for si in np.linspace(0.0, path.length, n)
    ]


def min_turn_radius(v: float, phi_max: float, g: float = 9.81) -> float:
    """Coordinated-turn radius v^2 / (g tan(phi_max))."""
    if v <= 0.0:
        raise ValueError("speed must be positive")
    if not 0.0 < phi_max < 0.5 * math.pi:
        raise ValueError("bank limit must be in (0, pi/2)")
    return v * v / (g * math.tan(phi_max))
