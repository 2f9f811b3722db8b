"""Bernstein-basis polynomial curves in control-point form.

A degree-n curve over [t0, tf] is written as

    x(t) = sum_i p_i * B_i^n(tau),   tau = (t - t0) / (tf - t0)

with B_i^n the Bernstein basis. Control points carry the geometry: the
curve interpolates the endpoints, stays inside the control-point convex
hull, and its derivative/product/elevation are again Bernstein curves
with control points obtained by small linear or bilinear maps. That
closure is what the trajectory optimizer builds on: every path constraint
becomes a bound on the control points of some derived curve.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

__all__ = [
    "BernsteinCurve",
    "CompositeTrajectory",
    "product",
    "squared_speed",
    "heading_rate_fraction",
    "arc_length",
    "segment_from_states",
]

_DOMAIN_RTOL = 1e-9


def _binomials(n: int) -> np.ndarray:
    """Row of binomial coefficients C(n, 0..n) as floats."""
    out = np.empty(n + 1)
    out[0] = 1.0
    for i in range(1, n + 1):
        out[i] = out[i - 1] * (n - i + 1) / i
    return out


class BernsteinCurve:
    """Polynomial curve of one or more dimensions in Bernstein form.

    Parameters
    ----------
    control_points : array_like, shape (n+1, D) or (n+1,)
        Control points; a flat array is treated as a 1-D curve.
    t0, tf : float
        Domain endpoints, tf > t0.
    """

    __slots__ = ("control_points", "t0", "tf")

    def __init__(self, control_points, t0: float, tf: float):
        cp = np.asarray(control_points, dtype=float)
        if cp.ndim == 1:
            cp = cp[:, None]
        if cp.ndim != 2 or cp.shape[0] < 1:
            raise ValueError("control points must have shape (n+1, D)")
        if not np.all(np.isfinite(cp)):
            raise ValueError("control points must be finite")
        t0 = float(t0)
        tf = float(tf)
        if not tf > t0:
            raise ValueError(f"degenerate domain: tf={tf} must exceed t0={t0}")
        self.control_points = cp
        self.t0 = t0
        self.tf = tf

    # ------------------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"BernsteinCurve(degree={self.degree}, dim={self.dim}, "
            f"t0={self.t0:g}, tf={self.tf:g})"
        )

    # ------------------------------------------------------------------
    def _tau(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        slack = _DOMAIN_RTOL * max(1.0, abs(self.t0), abs(self.tf))
        if np.any(t < self.t0 - slack) or np.any(t > self.tf + slack):
            raise ValueError(
                f"query time outside [{self.t0:g}, {self.tf:g}]"
            )
        return np.clip((t - self.t0) / self.duration, 0.0, 1.0)

    def eval(self, t):
        """Evaluate by de Casteljau reduction (numerically stable).

        Accepts a scalar or an array of times inside [t0, tf]; returns
        shape (D,) for a scalar query, (T, D) for an array.
        """
        scalar = np.isscalar(t) or np.ndim(t) == 0
        tau = np.atleast_1d(self._tau(t))[:, None, None]
        pts = np.broadcast_to(
            self.control_points, (tau.shape[0],) + self.control_points.shape
        ).copy()
        for _ in range(self.degree):
            pts = (1.0 - tau) * pts[:, :-1, :] + tau * pts[:, 1:, :]
        out = pts[:, 0, :]
        return out[0] if scalar else out

    def __call__(self, t):
        return self.eval(t)

    # ------------------------------------------------------------------
    def derivative(self, k: int = 1) -> "BernsteinCurve":
        """k-th time derivative, again in Bernstein form.

        Each order applies the finite-difference kernel [-1, 1] to the
        control points and scales by n / (tf - t0). A constant curve
        differentiates to the zero constant curve.
        """
        if k < 0:
            raise ValueError("derivative order must be >= 0")
        if k == 0:
            return self
        if self.degree == 0:
            return BernsteinCurve(
                np.zeros((1, self.dim)), self.t0, self.tf
            )
        if k > self.degree:
            raise ValueError(
                f"derivative order {k} exceeds curve degree {self.degree}"
            )
        cp = self.control_points
        n = self.degree
        for _ in range(k):
            cp = (n / self.duration) * np.diff(cp, axis=0)
            n -= 1
        return BernsteinCurve(cp, self.t0, self.tf)

    def elevated(self, r: int = 1) -> "BernsteinCurve":
        """Same curve expressed at degree n + r."""
        if r < 0:
            raise ValueError("elevation amount must be >= 0")
        if r == 0:
            return self
        n, m = self.degree, self.degree + r
        wa = _binomials(n)
        wr = _binomials(r)
        wm = _binomials(m)
        # elevation == product with the constant-one curve of degree r
        cp = np.empty((m + 1, self.dim))
        for d in range(self.dim):
            cp[:, d] = np.convolve(wa * self.control_points[:, d], wr) / wm
        return BernsteinCurve(cp, self.t0, self.tf)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis convex-hull interval: (min, max) over control points.

        Conservative: the curve never leaves the box, though the box may
        overhang the true range.
        """
        return (
            self.control_points.min(axis=0),
            self.control_points.max(axis=0),
        )

    def integral(self) -> np.ndarray:
        """Definite integral over the domain, per axis.

        Bernstein basis functions all integrate to duration / (n + 1),
        so the integral is the duration times the control-point mean.
        """
        return self.duration * self.control_points.mean(axis=0)

    # ------------------------------------------------------------------
    def _match(self, other: "BernsteinCurve"):
        if not isinstance(other, BernsteinCurve):
            raise TypeError("expected a BernsteinCurve")
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        slack = _DOMAIN_RTOL * max(1.0, abs(self.t0), abs(self.tf))
        if abs(other.t0 - self.t0) > slack or abs(other.tf - self.tf) > slack:
            raise ValueError("curves must share a domain")
        a, b = self, other
        if a.degree < b.degree:
            a = a.elevated(b.degree - a.degree)
        elif b.degree < a.degree:
            b = b.elevated(a.degree - b.degree)
        return a, b

    def __add__(self, other):
        a, b = self._match(other)
        return BernsteinCurve(
            a.control_points + b.control_points, a.t0, a.tf
        )

    def __sub__(self, other):
        a, b = self._match(other)
        return BernsteinCurve(
            a.control_points - b.control_points, a.t0, a.tf
        )

    def __mul__(self, scalar):
        if isinstance(scalar, BernsteinCurve):
            return product(self, scalar)
        return BernsteinCurve(
            float(scalar) * self.control_points, self.t0, self.tf
        )

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def component(self, axis: int) -> "BernsteinCurve":
        """1-D curve holding a single coordinate of this curve."""
        return BernsteinCurve(
            self.control_points[:, axis], self.t0, self.tf
        )

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "t0": self.t0,
            "tf": self.tf,
            "control_points": self.control_points.tolist(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "BernsteinCurve":
        cp = np.asarray(rec["control_points"], dtype=float)
        curve = cls(cp, rec["t0"], rec["tf"])
        if curve.degree != int(rec["degree"]):
            raise ValueError(
                f"record degree {rec['degree']} does not match "
                f"{curve.degree} control-point rows"
            )
        return curve


# ----------------------------------------------------------------------
def product(a: BernsteinCurve, b: BernsteinCurve) -> BernsteinCurve:
    """Exact product of two scalar (1-D) curves; degree adds.

    c_k = sum_{i+j=k} C(na,i) C(nb,j) / C(na+nb,k) * a_i * b_j, which is
    a plain convolution after pre/post weighting by binomial rows.
    """
    if a.dim != 1 or b.dim != 1:
        raise ValueError("product is defined for 1-D curves only")
    slack = _DOMAIN_RTOL * max(1.0, abs(a.t0), abs(a.tf))
    if abs(b.t0 - a.t0) > slack or abs(b.tf - a.tf) > slack:
        raise ValueError("curves must share a domain")
    na, nb = a.degree, b.degree
    wa = _binomials(na) * a.control_points[:, 0]
    wb = _binomials(nb) * b.control_points[:, 0]
    cp = np.convolve(wa, wb) / _binomials(na + nb)
    return BernsteinCurve(cp, a.t0, a.tf)


def squared_speed(curve: BernsteinCurve) -> BernsteinCurve:
    """1-D curve equal to vx^2 + vy^2 of a planar or 3-D curve."""
    if curve.dim < 2:
        raise ValueError("squared_speed needs at least x and y axes")
    v = curve.derivative(1)
    vx, vy = v.component(0), v.component(1)
    return product(vx, vx) + product(vy, vy)


def heading_rate_fraction(
    curve: BernsteinCurve,
) -> tuple[BernsteinCurve, BernsteinCurve]:
    """Numerator and denominator of the heading rate psi_dot = num/den.

    num = vx*ay - ax*vy and den = vx^2 + vy^2, both exact Bernstein
    curves, so |psi_dot| <= w is enforceable as two polynomial
    inequalities without the division.
    """
    if curve.dim < 2:
        raise ValueError("heading rate needs at least x and y axes")
    if curve.degree < 2:
        raise ValueError("heading rate needs degree >= 2")
    v = curve.derivative(1)
    a = curve.derivative(2)
    vx, vy = v.component(0), v.component(1)
    ax, ay = a.component(0), a.component(1)
    num = product(vx, ay) - product(ax, vy)
    den = product(vx, vx) + product(vy, vy)
    return num, den


def arc_length(curve: BernsteinCurve, tol: float = 1e-9) -> float:
    """Arc length by adaptive quadrature of |x'(t)|."""
    from scipy.integrate import quad

    v = curve.derivative(1)

    def speed(t):
        return float(np.linalg.norm(v.eval(t)))

    val, _ = quad(speed, curve.t0, curve.tf, epsabs=tol, limit=200)
    return val


# ----------------------------------------------------------------------
def segment_from_states(
    start,
    end,
    interior,
    t0: float,
    tf: float,
) -> BernsteinCurve:
    """Build a curve whose endpoint derivatives match prescribed states.

    ``start`` and ``end`` are (4, D) arrays of position, velocity,
    acceleration and jerk at t0 and tf; ``interior`` is an (m, D) array
    of the remaining free control points (m = degree - 7). Two segments
    that share a junction state are automatically C^3 across the joint,
    which is how the planner gets exact continuity without equality
    constraints.
    """
    start = np.atleast_2d(np.asarray(start, dtype=float))
    end = np.atleast_2d(np.asarray(end, dtype=float))
    interior = np.asarray(interior, dtype=float)
    if interior.ndim == 1:
        interior = interior[:, None]
    if start.shape != end.shape or start.shape[0] != 4:
        raise ValueError("start/end states must both be (4, D)")
    dim = start.shape[1]
    if interior.size and interior.shape[1] != dim:
        raise ValueError("interior points dimension mismatch")
    m = interior.shape[0] if interior.size else 0
    n = m + 7
    dt = float(tf) - float(t0)
    if dt <= 0.0:
        raise ValueError("tf must exceed t0")

    c1 = dt / n
    c2 = dt * dt / (n * (n - 1))
    c3 = dt ** 3 / (n * (n - 1) * (n - 2))
    p = np.empty((n + 1, dim))
    p0, v0, a0, j0 = start
    p1, v1, a1, j1 = end
    p[0] = p0
    p[1] = p[0] + v0 * c1
    p[2] = 2.0 * p[1] - p[0] + a0 * c2
    p[3] = 3.0 * p[2] - 3.0 * p[1] + p[0] + j0 * c3
    p[n] = p1
    p[n - 1] = p[n] - v1 * c1
    p[n - 2] = 2.0 * p[n - 1] - p[n] + a1 * c2
    p[n - 3] = 3.0 * p[n - 2] - 3.0 * p[n - 1] + p[n] - j1 * c3
    if m:
        p[4 : 4 + m] = interior
    return BernsteinCurve(p, t0, tf)


# ----------------------------------------------------------------------
class CompositeTrajectory:
    """Chain of Bernstein segments covering contiguous time intervals.

    Segment j lives on [T_{j-1}, T_j]; the knot times are the segment
    end times T_1..T_M. Continuity across knots is the builder's
    responsibility; ``continuity_errors`` reports the actual mismatch.
    """

    __slots__ = ("segments",)

    def __init__(self, segments: Sequence[BernsteinCurve]):
        segments = list(segments)
        if not segments:
            raise ValueError("need at least one segment")
        dim = segments[0].dim
        for prev, nxt in zip(segments, segments[1:]):
            if nxt.dim != dim:
                raise ValueError("segment dimensions differ")
            gap = abs(nxt.t0 - prev.tf)
            if gap > _DOMAIN_RTOL * max(1.0, abs(prev.tf)):
                raise ValueError(
                    f"segment domains do not chain at t={prev.tf:g}"
                )
        self.segments = segments

    @property
    def t0(self) -> float:
        return self.segments[0].t0

    @property
    def tf(self) -> float:
        return self.segments[-1].tf

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def knot_times(self) -> np.ndarray:
        """Segment end times T_1..T_M."""
        return np.array([seg.tf for seg in self.segments])

    def __len__(self) -> int:
        return len(self.segments)

    def _locate(self, t: float) -> BernsteinCurve:
        slack = _DOMAIN_RTOL * max(1.0, abs(self.tf))
        if t < self.t0 - slack or t > self.tf + slack:
            raise ValueError(
                f"query time {t:g} outside [{self.t0:g}, {self.tf:g}]"
            )
        ends = self.knot_times
        idx = int(np.searchsorted(ends, t, side="left"))
        idx = min(idx, len(self.segments) - 1)
        return self.segments[idx]

    def eval(self, t, k: int = 0):
        """Evaluate the k-th derivative at scalar or array times."""
        if np.isscalar(t) or np.ndim(t) == 0:
            seg = self._locate(float(t))
            return seg.derivative(k).eval(t) if k else seg.eval(t)
        t = np.asarray(t, dtype=float)
        out = np.empty((t.size, self.dim))
        for i, ti in enumerate(t.ravel()):
            out[i] = self.eval(float(ti), k)
        return out.reshape(t.shape + (self.dim,))

    def __call__(self, t):
        return self.eval(t)

    def derivative(self, k: int = 1) -> "CompositeTrajectory":
        return CompositeTrajectory([s.derivative(k) for s in self.segments])

    def arc_length(self, tol: float = 1e-9) -> float:
        return sum(arc_length(seg, tol) for seg in self.segments)

    def continuity_errors(self, order: int = 3) -> np.ndarray:
        """Max derivative mismatch across knots for orders 0..order."""
        errs = np.zeros(order + 1)
        for prev, nxt in zip(self.segments, self.segments[1:]):
            for k in range(order + 1):
                left = prev.derivative(k).eval(prev.tf)
                right = nxt.derivative(k).eval(nxt.t0)
                errs[k] = max(errs[k], float(np.max(np.abs(left - right))))
        return errs

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"segments": [seg.to_dict() for seg in self.segments]}

    @classmethod
    def from_dict(cls, rec: dict) -> "CompositeTrajectory":
        return cls([BernsteinCurve.from_dict(s) for s in rec["segments"]])

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "CompositeTrajectory":
        if hasattr(source, "read"):
            rec = json.load(source)
        elif "{" in str(source):
            rec = json.loads(source)
        else:
            with open(source) as fh:
                rec = json.load(fh)
        return cls.from_dict(rec)
