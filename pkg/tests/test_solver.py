"""Augmented-Lagrangian solver on problems with known optima."""

import numpy as np
import pytest

from glideplan.solver import (
    MultiplierState,
    NlpProblem,
    SolveOptions,
    SolveReport,
    solve_augmented_lagrangian,
)

TIGHT = SolveOptions(tol_con=1e-6, tol_grad=1e-8, max_outer=20)


def quad_obj(center):
    center = np.asarray(center, dtype=float)

    def f(z):
        d = z - center
        return float(d @ d), 2.0 * d

    return f


def test_unconstrained_quadratic():
    nlp = NlpProblem(n=3, objective=quad_obj([1.0, -2.0, 0.5]))
    z, rep, _ = solve_augmented_lagrangian(nlp, np.zeros(3), TIGHT)
    assert rep.converged
    assert np.allclose(z, [1.0, -2.0, 0.5], atol=1e-6)


def test_inequality_active_at_optimum():
    # min x^2 subject to x >= 1
    def ineq(z):
        return np.array([z[0] - 1.0]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=quad_obj([0.0]), inequality=ineq)
    z, rep, mult = solve_augmented_lagrangian(nlp, np.array([3.0]), TIGHT)
    assert rep.converged
    assert abs(z[0] - 1.0) < 1e-4
    assert mult.mu is not None and mult.mu[0] > 0.0


def test_inactive_constraint_leaves_optimum():
    # min (x-2)^2 subject to x >= 1: constraint slack at the optimum
    def ineq(z):
        return np.array([z[0] - 1.0]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=quad_obj([2.0]), inequality=ineq)
    z, rep, mult = solve_augmented_lagrangian(nlp, np.array([5.0]), TIGHT)
    assert rep.converged
    assert abs(z[0] - 2.0) < 1e-5
    assert mult.mu[0] == pytest.approx(0.0, abs=1e-8)


def test_equality_constrained_quadratic():
    # min |z|^2 subject to x + y = 1: optimum (0.5, 0.5)
    def eq(z):
        return np.array([z[0] + z[1] - 1.0]), np.array([[1.0, 1.0]])

    nlp = NlpProblem(n=2, objective=quad_obj([0.0, 0.0]), equality=eq)
    z, rep, mult = solve_augmented_lagrangian(nlp, np.zeros(2), TIGHT)
    assert rep.converged
    assert np.allclose(z, [0.5, 0.5], atol=1e-5)
    assert mult.lam is not None and mult.lam.size == 1


def test_bounds_are_hard():
    lo = np.array([-10.0])
    hi = np.array([2.0])
    nlp = NlpProblem(n=1, objective=quad_obj([5.0]), bounds=(lo, hi))
    z, rep, _ = solve_augmented_lagrangian(nlp, np.array([0.0]), TIGHT)
    assert rep.converged
    assert z[0] == pytest.approx(2.0, abs=1e-9)


def test_seed_outside_bounds_is_clipped():
    lo = np.array([0.0, 0.0])
    hi = np.array([1.0, 1.0])
    nlp = NlpProblem(n=2, objective=quad_obj([0.2, 0.8]), bounds=(lo, hi))
    z, rep, _ = solve_augmented_lagrangian(
        nlp, np.array([50.0, -50.0]), TIGHT
    )
    assert rep.converged
    assert np.allclose(z, [0.2, 0.8], atol=1e-6)


def test_family_diagnostics_on_infeasible_problem():
    # x >= 1 and -x >= 1 cannot both hold; the solver must report the
    # residual per family instead of claiming success
    def ineq(z):
        c = np.array([z[0] - 1.0, -z[0] - 1.0])
        J = np.array([[1.0], [-1.0]])
        return c, J

    nlp = NlpProblem(
        n=1,
        objective=quad_obj([0.0]),
        inequality=ineq,
        families={"lo": slice(0, 1), "hi": slice(1, 2)},
    )
    opts = SolveOptions(tol_con=1e-6, max_outer=5)
    z, rep, _ = solve_augmented_lagrangian(nlp, np.array([0.0]), opts)
    assert not rep.converged
    assert rep.max_violation > 0.5
    assert set(rep.violation_by_family) == {"lo", "hi"}
    assert "stopped" in rep.message
    assert "NOT converged" in rep.summary()


def test_family_values_feasible_at_solution():
    def ineq(z):
        c = np.array([z[0] - 1.0, 10.0 - z[0]])
        J = np.array([[1.0], [-1.0]])
        return c, J

    nlp = NlpProblem(
        n=1,
        objective=quad_obj([0.0]),
        inequality=ineq,
        families={"lower": slice(0, 1), "upper": slice(1, 2)},
    )
    _, rep, _ = solve_augmented_lagrangian(nlp, np.array([4.0]), TIGHT)
    assert rep.converged
    assert rep.violation_by_family["lower"] <= 1e-6
    assert rep.violation_by_family["upper"] == 0.0
    assert "converged" in rep.summary()


def test_bitwise_determinism():
    def ineq(z):
        c = np.array([z[0] + z[1] - 1.0, z[2] - 0.3])
        J = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return c, J

    nlp = NlpProblem(n=3, objective=quad_obj([0.0, 0.0, 0.0]),
                     inequality=ineq)
    z0 = np.array([2.0, -1.0, 0.0])
    za, ra, _ = solve_augmented_lagrangian(nlp, z0, TIGHT)
    zb, rb, _ = solve_augmented_lagrangian(nlp, z0, TIGHT)
    assert np.array_equal(za, zb)
    assert ra.cost == rb.cost
    assert ra.outer_iters == rb.outer_iters


def test_warm_start_converges_fast_near_solution():
    # objective below 1 keeps the internal cost normalization identical
    # across the two solves, so the carried multipliers stay calibrated
    def obj(z):
        d = z[0] - 0.0
        return 0.25 * d * d, np.array([0.5 * d])

    def ineq(z):
        return np.array([z[0] - 0.5]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=obj, inequality=ineq)
    z1, rep1, mult = solve_augmented_lagrangian(nlp, np.array([0.9]), TIGHT)
    assert rep1.converged and abs(z1[0] - 0.5) < 1e-4
    assert mult.rho is not None and mult.mu.size == 1
    z2, rep2, _ = solve_augmented_lagrangian(nlp, z1, TIGHT, warm=mult)
    assert rep2.converged
    assert rep2.outer_iters <= 2
    assert abs(z2[0] - 0.5) < 1e-4


def test_warm_start_recovers_after_rescale():
    # a seed with a much larger objective changes the normalization the
    # multipliers were scaled for; the solve must still reach the optimum
    def ineq(z):
        return np.array([z[0] - 1.0]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=quad_obj([0.0]), inequality=ineq)
    z1, _, mult = solve_augmented_lagrangian(nlp, np.array([3.0]), TIGHT)
    z2, rep2, _ = solve_augmented_lagrangian(nlp, z1, TIGHT, warm=mult)
    assert rep2.converged
    assert abs(z2[0] - 1.0) < 1e-4


def test_mu_seed_noop_for_feasible_seed():
    def ineq(z):
        return np.array([z[0] - 1.0]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=quad_obj([2.0]), inequality=ineq)
    seed = np.array([1.5])
    z_a, _, _ = solve_augmented_lagrangian(nlp, seed, TIGHT)
    z_b, _, _ = solve_augmented_lagrangian(
        nlp, seed, SolveOptions(tol_con=1e-6, tol_grad=1e-8, max_outer=20,
                                mu_seed=True)
    )
    assert np.array_equal(z_a, z_b)


def test_mu_seed_lands_within_seed_violation():
    # the preload trades accuracy for speed: the landing error stays on
    # the order of the seed's constraint violation
    def obj(z):
        d = z[0]
        return 0.25 * d * d, np.array([0.5 * d])

    def ineq(z):
        return np.array([z[0] - 1.0]), np.array([[1.0]])

    nlp = NlpProblem(n=1, objective=obj, inequality=ineq)
    seed = np.array([0.9])  # violation 0.1
    opts = SolveOptions(tol_con=1e-6, max_outer=30, mu_seed=True)
    z, rep, _ = solve_augmented_lagrangian(nlp, seed, opts)
    assert rep.converged
    assert rep.max_violation <= 1e-6
    assert abs(z[0] - 1.0) <= 0.12


def test_seed_shape_rejected():
    nlp = NlpProblem(n=2, objective=quad_obj([0.0, 0.0]))
    with pytest.raises(ValueError):
        solve_augmented_lagrangian(nlp, np.zeros(3))


def test_report_defaults():
    rep = SolveReport()
    assert not rep.converged
    assert rep.max_violation == np.inf
    state = MultiplierState()
    assert state.mu is None and state.lam is None and state.rho is None
