"""Self-contained augmented-Lagrangian solver for smooth NLPs.

The trajectory problems are small (one to a few hundred variables, a few
hundred polynomial inequality rows) but solved often, including inside
the replanning loop, so the solver favors deterministic behavior and
warm starts over generality:

  outer loop   classic PHR multiplier updates with monotone penalty
               growth when the violation stalls
  inner loop   bound-constrained quasi-Newton (L-BFGS-B) on the
               augmented Lagrangian with caller-supplied gradients

Identical inputs produce bitwise-identical iterates; there is no
randomization anywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "NlpProblem",
    "SolveOptions",
    "SolveReport",
    "MultiplierState",
    "solve_augmented_lagrangian",
]


@dataclass
class NlpProblem:
    """Smooth NLP: min f(z) s.t. c(z) >= 0, h(z) = 0, lo <= z <= hi.

    ``objective`` returns (f, grad f); ``inequality`` returns (c, J_c)
    with J_c of shape (m, n); ``equality`` likewise or None. ``families``
    names contiguous row ranges of c for diagnostics.
    """

    n: int
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    inequality: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    equality: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    bounds: tuple[np.ndarray, np.ndarray] | None = None
    families: dict[str, slice] = field(default_factory=dict)


@dataclass
class SolveOptions:
    """Tolerances and loop limits.

    ``mu_seed`` preloads inequality multipliers proportional to the
    seed's constraint violations. A no-op for feasible seeds; for
    violating seeds it trades an outer iteration for a landing error on
    the order of the seed violation, so only enable it when re-solving
    from a previous solution.
    """

    tol_con: float = 1e-3
    tol_grad: float = 1e-4
    max_outer: int = 10
    inner_maxiter: int = 60
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e8
    mu_seed: bool = False
    verbose: bool = False


@dataclass
class MultiplierState:
    """Multipliers and penalty carried across warm-started solves."""

    mu: np.ndarray | None = None
    lam: np.ndarray | None = None
    rho: float | None = None


@dataclass
class SolveReport:
    converged: bool = False
    outer_iters: int = 0
    inner_iters: int = 0
    n_evals: int = 0
    max_violation: float = np.inf
    violation_by_family: dict = field(default_factory=dict)
    grad_norm: float = np.inf
    wall_time: float = 0.0
    cost: float = np.nan
    cost_terms: dict = field(default_factory=dict)
    message: str = ""

    def summary(self) -> str:
        fam = ", ".join(
            f"{k}={v:.2e}" for k, v in self.violation_by_family.items()
        )
        return (
            f"{'converged' if self.converged else 'NOT converged'} "
            f"cost={self.cost:.6g} viol={self.max_violation:.2e} "
            f"outer={self.outer_iters} inner={self.inner_iters} "
            f"t={self.wall_time * 1e3:.0f} ms"
            + (f" [{fam}]" if fam else "")
        )


def solve_augmented_lagrangian(
    nlp: NlpProblem,
    z0: np.ndarray,
    opts: SolveOptions = SolveOptions(),
    warm: MultiplierState | None = None,
) -> tuple[np.ndarray, SolveReport, MultiplierState]:
    """Minimize the NLP from z0; returns (z, report, multiplier state)."""
    t_start = time.perf_counter()
    z = np.array(z0, dtype=float)
    if z.shape != (nlp.n,):
        raise ValueError(f"seed has shape {z.shape}, expected ({nlp.n},)")

    # multipliers
    m_ineq = 0
    c_seed = None
    if nlp.inequality is not None:
        c_seed, _ = nlp.inequality(z)
        m_ineq = c_seed.size
    m_eq = 0
    if nlp.equality is not None:
        h0, _ = nlp.equality(z)
        m_eq = h0.size

    mu = np.zeros(m_ineq)
    if opts.mu_seed and c_seed is not None:
        # pre-load multipliers on rows the seed already violates; one
        # free PHR update that typically saves an outer iteration. Only
        # sensible for seeds already near the solution: the preload
        # scales with the seed violation, and a far-off seed produces
        # multipliers that push the first iterate deep into the
        # feasible interior
        mu = opts.rho0 * np.maximum(0.0, -c_seed)
    lam = np.zeros(m_eq)
    rho = opts.rho0
    if warm is not None:
        if warm.mu is not None and warm.mu.size == m_ineq:
            mu = warm.mu.copy()
        if warm.lam is not None and warm.lam.size == m_eq:
            lam = warm.lam.copy()
        if warm.rho is not None:
            rho = warm.rho

    report = SolveReport()
    evals = [0]
    # normalize by the seed objective so gradient/stall tolerances act
    # relatively; otherwise large-cost problems never hit gtol
    f_ref = max(1.0, abs(float(nlp.objective(z)[0])))

    def auglag(zv: np.ndarray, rho_v: float):
        evals[0] += 1
        f, g = nlp.objective(zv)
        f, g = f / f_ref, g / f_ref
        if nlp.inequality is not None:
            c, Jc = nlp.inequality(zv)
            slack = np.maximum(0.0, mu - rho_v * c)
            f = f + float(slack @ slack - mu @ mu) / (2.0 * rho_v)
            g = g - Jc.T @ slack
        if nlp.equality is not None:
            h, Jh = nlp.equality(zv)
            f = f - float(lam @ h) + 0.5 * rho_v * float(h @ h)
            g = g + Jh.T @ (rho_v * h - lam)
        return f, g

    bounds = None
    if nlp.bounds is not None:
        lo, hi = nlp.bounds
        bounds = list(zip(lo, hi))
        z = np.clip(z, lo, hi)

    def violation(zv: np.ndarray) -> tuple[float, dict]:
        worst = 0.0
        fam = {}
        if nlp.inequality is not None:
            c, _ = nlp.inequality(zv)
            viol = np.maximum(0.0, -c)
            worst = float(viol.max()) if viol.size else 0.0
            for name, sl in nlp.families.items():
                part = viol[sl]
                fam[name] = float(part.max()) if part.size else 0.0
        if nlp.equality is not None:
            h, _ = nlp.equality(zv)
            if h.size:
                worst = max(worst, float(np.abs(h).max()))
        return worst, fam

    viol_prev = np.inf
    f_prev = np.inf
    for outer in range(1, opts.max_outer + 1):
        res = minimize(
            auglag,
            z,
            args=(rho,),
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            options={
                "maxiter": opts.inner_maxiter,
                "gtol": opts.tol_grad,
                "ftol": 1e-14,
            },
        )
        z = res.x
        report.inner_iters += int(res.nit)
        report.outer_iters = outer

        viol, fam = violation(z)
        if nlp.inequality is not None:
            c, _ = nlp.inequality(z)
            mu = np.maximum(0.0, mu - rho * c)
        if nlp.equality is not None:
            h, _ = nlp.equality(z)
            lam = lam - rho * h

        report.max_violation = viol
        report.violation_by_family = fam
        report.grad_norm = float(np.linalg.norm(res.jac, ord=np.inf))
        f_true = float(nlp.objective(z)[0])
        if opts.verbose:
            print(
                f"  outer {outer}: viol={viol:.3e} rho={rho:.1e} "
                f"inner={res.nit} f={f_true:.6g}"
            )
        # the inner solve rarely hits its own gradient tolerance on the
        # stiff high-degree rows, so a stalled feasible cost also counts
        # as converged
        stalled = abs(f_true - f_prev) <= max(1e-6, 1e-3 * abs(f_true))
        if viol <= opts.tol_con and (
            res.status == 0
            or report.grad_norm <= 10.0 * opts.tol_grad
            or stalled
        ):
            report.converged = True
            report.message = "violation tolerance met, cost stationary"
            break
        f_prev = f_true
        if viol > 0.5 * viol_prev and rho < opts.rho_max:
            rho = min(rho * opts.rho_growth, opts.rho_max)
        viol_prev = min(viol_prev, viol) if np.isfinite(viol_prev) else viol

    if not report.converged:
        if report.max_violation <= opts.tol_con:
            # feasible but the cost never certifiably stalled; accept it
            # rather than discard a usable iterate
            report.converged = True
            report.message = "feasible at outer-iteration cap"
        else:
            report.message = (
                f"stopped after {report.outer_iters} outer iterations with "
                f"violation {report.max_violation:.3e}"
            )
    report.cost = float(nlp.objective(z)[0])
    report.n_evals = evals[0]
    report.wall_time = time.perf_counter() - t_start
    return z, report, MultiplierState(mu=mu, lam=lam, rho=rho)
