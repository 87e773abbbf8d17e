import numpy as np
import pytest

from ncgal import (
    AlParams,
    AlStatus,
    EqualityProblem,
    NewtonCgParams,
    SmoothFunction,
    al_function,
    al_solve,
    check_fosp,
    check_sosp,
    fd_check,
    feasible_seed_point,
    linear_sphere_problem,
    multiplier_update,
    penalty_update,
    random_instance,
    sphere_constrained,
    tolerance_schedule,
    warm_start_point,
)
from ncgal.auglag import SubproblemFailure, schedule_floor_index


def default_inner(**kw):
    base = dict(eps_g=1e-4, eps_H=1e-2, theta=0.8, zeta=0.5, eta=0.2, oracle="exact")
    base.update(kw)
    return NewtonCgParams(**base)


def sphere_params(z, **kw):
    base = dict(eps1=1e-4, eps2=1e-2, lambda_max=100.0, rho0=10.0, alpha=0.25,
                r=10.0, z_feas=z, x0=z.copy(), lambda0=np.zeros(1),
                inner=default_inner())
    base.update(kw)
    return AlParams(**base)


# ---------------------------------------------------------------- al_function

def test_al_function_reduces_to_objective_when_unweighted():
    inst = random_instance(6, 3, 1.0, seed=1)
    problem = sphere_constrained(inst)
    z = feasible_seed_point(6)
    al = al_function(problem, np.zeros(1), 0.0, z)
    x = np.random.default_rng(0).standard_normal(6)
    assert al.value(x) == pytest.approx(problem.f.value(x))
    np.testing.assert_allclose(al.gradient(x), problem.f.gradient(x), rtol=1e-12)
    v = np.random.default_rng(1).standard_normal(6)
    np.testing.assert_allclose(al.hess_vec(x, v), problem.f.hess_vec(x, v), rtol=1e-12)


def test_al_function_on_feasible_point_with_feasible_shift():
    # both x and the shift point sit on the sphere, so the shifted constraint
    # vanishes and only the multiplier term's Jacobian part survives
    problem = linear_sphere_problem(2)
    x = np.array([1.0, 0.0])
    z = np.array([0.0, 1.0])
    lam = np.array([2.0])
    al = al_function(problem, lam, 5.0, z)
    assert al.value(x) == pytest.approx(problem.f.value(x))
    expected_grad = problem.f.gradient(x) + problem.jacobian_tvec(x, lam)
    np.testing.assert_allclose(al.gradient(x), expected_grad, rtol=1e-12)


def test_al_function_passes_fd_check():
    inst = random_instance(8, 4, 1.0, seed=5)
    problem = sphere_constrained(inst)
    rng = np.random.default_rng(2)
    al = al_function(problem, rng.standard_normal(1), 7.5, feasible_seed_point(8))
    g_err, h_err = fd_check(al, rng.standard_normal(8))
    assert g_err <= 1e-5
    assert h_err <= 1e-5


# ---------------------------------------------------------- schedule and steps

def test_tolerance_schedule_starts_at_one():
    assert tolerance_schedule(0, 1e-4, 1e-2, 10.0) == (1.0, 1.0)


def test_tolerance_schedule_floors_immediately_for_r_ten():
    # w1 = 10^(log(1e-4)/log 2) ~ 1e-13.29 is already below the floor at k=1
    tau_g, tau_H = tolerance_schedule(1, 1e-4, 1e-2, 10.0)
    assert tau_g == 1e-4
    assert tau_H == 1e-2
    w1 = 10.0 ** (np.log(1e-4) / np.log(2.0))
    assert w1 < 1e-4


def test_tolerance_schedule_hits_floor_exactly_for_r_two():
    # w1 = 2^(log eps / log 2) = eps: the schedule reaches the floor at k = 1
    assert schedule_floor_index(1e-4, 2.0) == 1
    assert tolerance_schedule(1, 1e-4, 1e-2, 2.0) == (1e-4, 1e-2)


def test_tolerance_schedule_above_floor_before_crossover():
    tau_g, tau_H = tolerance_schedule(1, 1e-4, 1e-2, 1.5)
    assert tau_g > 1e-4
    assert tau_H > 1e-2
    assert schedule_floor_index(1e-4, 1.5) == 2
    assert tolerance_schedule(2, 1e-4, 1e-2, 1.5) == (1e-4, 1e-2)


def test_warm_start_returns_z_when_al_value_exceeds_threshold():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    far = np.array([5.0, 5.0])  # infeasible, huge penalty
    start = warm_start_point(problem, far, np.zeros(1), 1e6, z)
    np.testing.assert_array_equal(start, z)


def test_warm_start_keeps_iterate_when_below_threshold():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    good = np.array([-1.0, 0.0])  # feasible with smaller objective
    start = warm_start_point(problem, good, np.zeros(1), 10.0, z)
    np.testing.assert_array_equal(start, good)


def test_warm_start_at_z_returns_z_either_way():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    start = warm_start_point(problem, z, np.zeros(1), 10.0, z)
    np.testing.assert_array_equal(start, z)


def test_multiplier_update_inside_ball():
    lam_tilde, lam = multiplier_update(np.zeros(1), 10.0, np.array([0.5]), 100.0)
    assert lam_tilde[0] == pytest.approx(5.0)
    assert lam[0] == pytest.approx(5.0)


def test_multiplier_update_projects_radially():
    lam_tilde, lam = multiplier_update(np.zeros(1), 1000.0, np.array([0.5]), 100.0)
    assert lam_tilde[0] == pytest.approx(500.0)
    assert lam[0] == pytest.approx(100.0)


def test_multiplier_update_feasible_fixed_point():
    lam0 = np.array([3.0, -4.0])
    lam_tilde, lam = multiplier_update(lam0, 50.0, np.zeros(2), 100.0)
    np.testing.assert_array_equal(lam_tilde, lam0)
    np.testing.assert_array_equal(lam, lam0)


def test_penalty_update_rules():
    assert penalty_update(10.0, 0.0, 0.0, 0.25, 10.0, k=0) == 100.0
    assert penalty_update(10.0, 0.1, 1.0, 0.25, 10.0, k=3) == 10.0
    assert penalty_update(10.0, 0.5, 1.0, 0.25, 10.0, k=3) == 100.0


# ------------------------------------------------------------- residual checks

def test_check_fosp_at_analytic_solution():
    problem = linear_sphere_problem(2)
    grad_res, feas = check_fosp(problem, np.array([-1.0, 0.0]), np.array([0.5]))
    assert grad_res == pytest.approx(0.0, abs=1e-14)
    assert feas == pytest.approx(0.0, abs=1e-14)


def test_check_sosp_hand_computed_values():
    problem = linear_sphere_problem(2)
    # minimizer: tangent space spanned by e2, curvature 2*lambda = 1
    assert check_sosp(problem, np.array([-1.0, 0.0]), np.array([0.5])) == pytest.approx(1.0)
    # maximizer: curvature -1, certifying it is not a second-order point
    assert check_sosp(problem, np.array([1.0, 0.0]), np.array([-0.5])) == pytest.approx(-1.0)


def test_check_sosp_unconstrained_reduces_to_min_eigenvalue():
    F = SmoothFunction(3, lambda x: 0.5 * float(x @ x),
                       lambda x: x.copy(), lambda x, v: v.copy())
    problem = EqualityProblem(3, 0, F, None, None, None, None)
    assert check_sosp(problem, np.zeros(3), np.zeros(0)) == pytest.approx(1.0)


# ------------------------------------------------------------------- al_solve

def test_sphere_problem_converges_to_analytic_solution():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    report = al_solve(problem, sphere_params(z))
    assert report.status == AlStatus.CONVERGED
    np.testing.assert_allclose(report.x_final, [-1.0, 0.0], atol=1e-3)
    assert report.lambda_tilde_final[0] == pytest.approx(0.5, abs=1e-2)
    assert report.residuals.fosp_grad <= 1e-4
    assert report.residuals.feasibility <= 1e-4
    assert report.residuals.sosp_lambda_min >= -1e-2


def test_sphere_problem_structural_invariants():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    report = al_solve(problem, sphere_params(z))
    rhos = report.rho_trace
    assert rhos[1] == pytest.approx(10.0 * rhos[0])  # forced growth at k = 0
    for a, b in zip(rhos, rhos[1:]):
        assert b == pytest.approx(a) or b == pytest.approx(10.0 * a)
    f_z = problem.f.value(z)
    for rec in report.outer_records:
        assert np.linalg.norm(rec.lambda_trunc) <= 100.0 + 1e-12
        assert rec.al_value <= f_z + 1e-9 * (1 + abs(f_z))
        assert rec.al_grad_norm <= rec.tau_g


def test_al_solve_rejects_infeasible_anchor():
    problem = linear_sphere_problem(2)
    bad_z = np.array([2.0, 0.0])  # ||c|| = 3 > eps1/2
    with pytest.raises(ValueError):
        al_solve(problem, sphere_params(bad_z, x0=bad_z.copy()))


def test_al_solve_outer_limit_status():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    report = al_solve(problem, sphere_params(z, max_outer=1))
    assert report.status == AlStatus.OUTER_LIMIT
    assert report.outer_iters == 1


def test_identically_zero_constraint_degenerates_to_unconstrained():
    inst = random_instance(6, 3, 1.0, seed=21)
    from ncgal import robust_regression, newton_cg
    F_ref = robust_regression(inst)
    base = newton_cg(F_ref, np.ones(6), default_inner(eps_g=1e-4, eps_H=1e-2))

    F = robust_regression(inst)
    problem = EqualityProblem(
        6, 1, F,
        constraint_fn=lambda x: np.zeros(1),
        jacobian_tvec_fn=lambda x, w: np.zeros(6),
        jacobian_vec_fn=lambda x, v: np.zeros(1),
        constraint_hess_vec_fn=lambda x, w, v: np.zeros(6))
    z = np.ones(6)
    report = al_solve(problem, sphere_params(z, x0=np.ones(6)))
    assert report.status == AlStatus.CONVERGED
    # the tolerance schedule warms up through a coarse solve, so iterates are
    # not bitwise equal; both runs must land in the same tolerance ball
    np.testing.assert_allclose(report.x_final, base.x_final, atol=1e-3)
    assert np.linalg.norm(F.gradient(report.x_final)) <= 1e-4
    assert report.residuals.feasibility == 0.0
    assert report.residuals.fosp_grad <= 1e-4


def test_zero_constraint_count_runs_unconstrained():
    F = SmoothFunction(3, lambda x: 0.5 * float(x @ x),
                       lambda x: x.copy(), lambda x, v: v.copy())
    problem = EqualityProblem(3, 0, F, None, None, None, None)
    z = np.zeros(3)
    params = AlParams(eps1=1e-4, eps2=1e-2, lambda_max=100.0, rho0=10.0,
                      alpha=0.25, r=10.0, z_feas=z, x0=np.ones(3),
                      lambda0=np.zeros(0), inner=default_inner())
    report = al_solve(problem, params)
    assert report.status == AlStatus.CONVERGED
    assert np.linalg.norm(report.x_final) <= 1e-4


def test_fosp_only_mode_converges_on_sphere():
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    report = al_solve(problem, sphere_params(z, fosp_only=True))
    assert report.status == AlStatus.CONVERGED
    assert report.residuals.fosp_grad <= 1e-4
    assert report.residuals.feasibility <= 1e-4
    assert report.residuals.sosp_lambda_min is None


def test_inner_failure_is_propagated_with_context():
    # an inner iteration cap of 1 cannot reach the subproblem tolerances
    problem = linear_sphere_problem(2)
    z = np.array([1.0, 0.0])
    params = sphere_params(z, inner=default_inner(max_outer_iters=1))
    with pytest.raises(SubproblemFailure) as exc:
        al_solve(problem, params)
    assert exc.value.inner_report is not None


def test_adjoint_consistency_of_sphere_jacobian_maps():
    inst = random_instance(7, 3, 1.0, seed=8)
    problem = sphere_constrained(inst)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.standard_normal(7)
        u = rng.standard_normal(7)
        w = rng.standard_normal(1)
        lhs = float(u @ problem.jacobian_tvec(x, w))
        rhs = float(w @ problem.jacobian_vec(x, u))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_lambda0_outside_ball_rejected():
    z = np.array([1.0, 0.0])
    with pytest.raises(ValueError):
        sphere_params(z, lambda0=np.array([200.0]))
