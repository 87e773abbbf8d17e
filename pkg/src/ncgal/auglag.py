"""Augmented-Lagrangian method for equality-constrained minimization.

The method works on a shifted problem whose constraint is
ctilde(x) = c(x) - c(z_feas) for a known nearly feasible point z_feas, so
z_feas is exactly feasible for the shifted constraint. Each outer iteration
minimizes the augmented Lagrangian

    L(x, lam; rho) = f(x) + lam' ctilde(x) + rho/2 * ||ctilde(x)||^2

with the Newton-CG solver to a geometrically tightening pair of tolerances,
updates the classical multiplier estimate, projects it onto a ball of radius
lambda_max (a safeguarded multiplier), and grows the penalty whenever the
constraint violation did not shrink enough.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from math import ceil, log

import numpy as np

from .newton_cg import NewtonCgParams, NewtonCgReport, SolveStatus, newton_cg
from .operators import DENSE_CAP, EvalCounts, SmoothFunction, as_vector


class EqualityProblem:
    """Matrix-free evaluators for min f(x) subject to c(x) = 0.

    The constraint Jacobian J(x) = grad c(x) (n x m, columns are the
    constraint gradients) is available only through its action:
    ``jacobian_tvec`` computes J(x) w for multiplier-space w, ``jacobian_vec``
    computes J(x)' v for primal-space v, and ``constraint_hess_vec`` applies
    the w-weighted sum of constraint Hessians to v. The two Jacobian actions
    must be adjoint to each other; tests check this on random probes.
    """

    def __init__(self, n: int, m: int, f: SmoothFunction,
                 constraint_fn, jacobian_tvec_fn, jacobian_vec_fn,
                 constraint_hess_vec_fn):
        if n < 1 or m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if f.dimension != n:
            raise ValueError("objective dimension does not match n")
        self.n = int(n)
        self.m = int(m)
        self.f = f
        self._constraint_fn = constraint_fn
        self._jacobian_tvec_fn = jacobian_tvec_fn
        self._jacobian_vec_fn = jacobian_vec_fn
        self._constraint_hess_vec_fn = constraint_hess_vec_fn
        self.counts = EvalCounts()

    def _empty(self) -> np.ndarray:
        return np.zeros(0)

    def constraint(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        self.counts.constraint_evals += 1
        if self.m == 0:
            return self._empty()
        return as_vector(self._constraint_fn(x), self.m, "constraint value")

    def jacobian_tvec(self, x, w) -> np.ndarray:
        """J(x) w: combine constraint gradients with weights w in R^m."""
        x = as_vector(x, self.n)
        w = as_vector(w, self.m, "w")
        self.counts.jacobian_vecs += 1
        if self.m == 0:
            return np.zeros(self.n)
        return as_vector(self._jacobian_tvec_fn(x, w), self.n, "jacobian_tvec")

    def jacobian_vec(self, x, v) -> np.ndarray:
        """J(x)' v: directional derivatives of all constraints along v."""
        x = as_vector(x, self.n)
        v = as_vector(v, self.n, "v")
        self.counts.jacobian_vecs += 1
        if self.m == 0:
            return self._empty()
        return as_vector(self._jacobian_vec_fn(x, v), self.m, "jacobian_vec")

    def constraint_hess_vec(self, x, w, v) -> np.ndarray:
        """(sum_i w_i hess c_i(x)) v for weights w in R^m."""
        x = as_vector(x, self.n)
        w = as_vector(w, self.m, "w")
        v = as_vector(v, self.n, "v")
        self.counts.hess_vecs += 1
        if self.m == 0:
            return np.zeros(self.n)
        return as_vector(self._constraint_hess_vec_fn(x, w, v), self.n,
                         "constraint_hess_vec")

    def total_counts(self) -> EvalCounts:
        return self.counts + self.f.counts


class AlStatus(str, Enum):
    CONVERGED = "converged"
    OUTER_LIMIT = "outer_limit"


@dataclass
class AlParams:
    eps1: float
    eps2: float
    lambda_max: float
    rho0: float
    alpha: float
    r: float
    z_feas: np.ndarray
    x0: np.ndarray
    lambda0: np.ndarray
    inner: NewtonCgParams
    delta: float = 0.01
    max_outer: int = 1000
    fosp_only: bool = False
    dense_cap: int = DENSE_CAP

    def __post_init__(self):
        if not 0.0 < self.eps1 < 1.0 or not 0.0 < self.eps2 < 1.0:
            raise ValueError("eps1 and eps2 must lie in (0, 1)")
        if self.lambda_max <= 0.0:
            raise ValueError("lambda_max must be positive")
        if self.rho0 <= 0.0:
            raise ValueError("rho0 must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.r <= 1.0:
            raise ValueError("r must exceed 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if float(np.linalg.norm(self.lambda0)) > self.lambda_max * (1 + 1e-12):
            raise ValueError("lambda0 must lie in the multiplier ball")


@dataclass
class AlOuterRecord:
    """Per-outer-iteration bookkeeping for invariant checks and reports."""

    k: int
    tau_g: float
    tau_H: float
    rho: float
    warm_started: bool
    al_value: float  # L at the accepted iterate, for the threshold invariant
    al_grad_norm: float
    ctilde_norm: float
    c_norm: float
    lambda_tilde: np.ndarray
    lambda_trunc: np.ndarray
    inner_iterations: int
    inner_status: SolveStatus


@dataclass
class AlResiduals:
    fosp_grad: float
    feasibility: float
    sosp_lambda_min: float | None = None


@dataclass
class AlReport:
    x_final: np.ndarray
    lambda_tilde_final: np.ndarray
    status: AlStatus
    outer_iters: int
    rho_trace: list[float]
    ctilde_norm_trace: list[float]
    outer_records: list[AlOuterRecord]
    inner_reports: list[NewtonCgReport]
    residuals: AlResiduals
    eval_counts: EvalCounts

    @property
    def total_inner_iterations(self) -> int:
        return sum(len(rep.trace) for rep in self.inner_reports)


class SubproblemFailure(RuntimeError):
    """An inner Newton-CG solve ended abnormally; its report is attached."""

    def __init__(self, message: str, k: int, inner_report: NewtonCgReport):
        super().__init__(message)
        self.k = k
        self.inner_report = inner_report


def al_function(problem: EqualityProblem, lam, rho: float, z_feas) -> SmoothFunction:
    """The augmented Lagrangian of the shifted problem as a SmoothFunction.

    value    f(x) + lam' ctilde(x) + rho/2 ||ctilde(x)||^2
    gradient grad f(x) + J(x) (lam + rho ctilde(x))
    hess*v   hess f(x) v + (sum_i (lam + rho ctilde)_i hess c_i(x)) v
             + rho J(x) J(x)' v

    assembled from the problem's matrix-free maps. The shifted constraint at
    the last-evaluated point is cached, since value/gradient/Hessian calls at
    one iterate share it.
    """
    lam = as_vector(lam, problem.m, "lam")
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")
    z_feas = as_vector(z_feas, problem.n, "z_feas")
    c_shift = problem.constraint(z_feas)
    cache: dict = {"x": None, "ct": None}

    def ctilde(x: np.ndarray) -> np.ndarray:
        if cache["x"] is None or not np.array_equal(cache["x"], x):
            cache["x"] = x.copy()
            cache["ct"] = problem.constraint(x) - c_shift
        return cache["ct"]

    def value(x):
        ct = ctilde(x)
        return problem.f.value(x) + float(lam @ ct) + 0.5 * rho * float(ct @ ct)

    def gradient(x):
        ct = ctilde(x)
        return problem.f.gradient(x) + problem.jacobian_tvec(x, lam + rho * ct)

    def hess_vec(x, v):
        ct = ctilde(x)
        hv = problem.f.hess_vec(x, v)
        hv = hv + problem.constraint_hess_vec(x, lam + rho * ct, v)
        hv = hv + rho * problem.jacobian_tvec(x, problem.jacobian_vec(x, v))
        return hv

    return SmoothFunction(problem.n, value, gradient, hess_vec)


def schedule_floor_index(eps1: float, r: float) -> int:
    """First outer index at which the tolerance schedule reaches its floor."""
    del eps1  # the floor index depends only on the growth factor
    return ceil(log(2.0) / log(r))


def tolerance_schedule(k: int, eps1: float, eps2: float, r: float) -> tuple[float, float]:
    """Inner tolerances (max{eps1, w1^k}, max{eps2, w2^k}) with w_i = r^(log eps_i / log 2).

    For k at or past ceil(log 2 / log r) the decaying term is provably at or
    below the floor, so the floor is returned exactly rather than through the
    rounded power (the two agree mathematically; the power can land one ulp
    off at the crossover).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k >= schedule_floor_index(eps1, r):
        return eps1, eps2
    w1 = r ** (log(eps1) / log(2.0))
    w2 = r ** (log(eps2) / log(2.0))
    return max(eps1, w1 ** k), max(eps2, w2 ** k)


def warm_start_point(problem: EqualityProblem, x_k, lam_k, rho_k: float,
                     z_feas) -> np.ndarray:
    """Subproblem start: z_feas when L(x_k) exceeds f(z_feas), else x_k.

    Because ctilde(z_feas) = 0 exactly, L(z_feas, lam; rho) = f(z_feas), so
    the chosen start always satisfies L(start) <= f(z_feas).
    """
    x_k = as_vector(x_k, problem.n)
    z_feas = as_vector(z_feas, problem.n, "z_feas")
    al = al_function(problem, lam_k, rho_k, z_feas)
    if al.value(x_k) > problem.f.value(z_feas):
        return z_feas.copy()
    return x_k.copy()


def multiplier_update(lam_k, rho_k: float, ctilde_next, lambda_max: float
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Classical update lam + rho*ctilde, then projection onto the ball."""
    lam_k = np.asarray(lam_k, dtype=float)
    ctilde_next = np.asarray(ctilde_next, dtype=float)
    lam_tilde = lam_k + rho_k * ctilde_next
    norm = float(np.linalg.norm(lam_tilde))
    if norm <= lambda_max:
        return lam_tilde, lam_tilde.copy()
    return lam_tilde, (lambda_max / norm) * lam_tilde


def penalty_update(rho_k: float, ctilde_next_norm: float, ctilde_curr_norm: float,
                   alpha: float, r: float, k: int) -> float:
    """Grow rho by r at k = 0 and whenever the violation shrank by less than alpha."""
    if k == 0 or ctilde_next_norm > alpha * ctilde_curr_norm:
        return r * rho_k
    return rho_k


def check_fosp(problem: EqualityProblem, x, lambda_tilde) -> tuple[float, float]:
    """Stationarity and feasibility residuals (||grad f + J lam||, ||c||)."""
    x = as_vector(x, problem.n)
    lambda_tilde = as_vector(lambda_tilde, problem.m, "lambda_tilde")
    grad = problem.f.gradient(x) + problem.jacobian_tvec(x, lambda_tilde)
    return float(np.linalg.norm(grad)), float(np.linalg.norm(problem.constraint(x)))


def _nullspace(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of ``mat`` (rows x cols), via SVD."""
    if mat.size == 0:
        return np.eye(mat.shape[1])
    u, s, vt = np.linalg.svd(mat)
    tol = max(mat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    return vt[rank:].T


def check_sosp(problem: EqualityProblem, x, lambda_tilde,
               cap: int = DENSE_CAP) -> float:
    """Smallest eigenvalue of the Lagrangian Hessian on the constraint tangent space.

    Dense, test-scale verification: forms M = hess f + sum_i lam_i hess c_i
    and an orthonormal basis Z of null(J(x)'), and returns lambda_min(Z'MZ).
    With no constraints this is just lambda_min(hess f); a trivial tangent
    space (full-rank square Jacobian) certifies vacuously with +inf.
    """
    x = as_vector(x, problem.n)
    lambda_tilde = as_vector(lambda_tilde, problem.m, "lambda_tilde")
    n = problem.n
    if n > cap:
        raise ValueError(f"dimension {n} exceeds dense cap {cap}")
    basis = np.eye(n)
    m_mat = np.empty((n, n))
    for i in range(n):
        col = problem.f.hess_vec(x, basis[i])
        if problem.m > 0:
            col = col + problem.constraint_hess_vec(x, lambda_tilde, basis[i])
        m_mat[:, i] = col
    m_mat = 0.5 * (m_mat + m_mat.T)
    if problem.m == 0:
        return float(np.linalg.eigvalsh(m_mat)[0])
    jac = np.empty((n, problem.m))
    for i in range(problem.m):
        w = np.zeros(problem.m)
        w[i] = 1.0
        jac[:, i] = problem.jacobian_tvec(x, w)
    z = _nullspace(jac.T)
    if z.shape[1] == 0:
        return float("inf")
    reduced = z.T @ m_mat @ z
    reduced = 0.5 * (reduced + reduced.T)
    return float(np.linalg.eigvalsh(reduced)[0])


def al_solve(problem: EqualityProblem, params: AlParams) -> AlReport:
    """Run the outer augmented-Lagrangian loop until both tolerances hold.

    On CONVERGED the accepted iterate satisfies
    ||grad f + J lam_tilde|| <= eps1 and ||c|| <= eps1 deterministically; with
    the exact inner oracle the Hessian of the augmented Lagrangian at the
    accepted iterate additionally has lambda_min >= -eps2, which implies the
    tangent-space curvature condition. The untruncated multiplier lam_tilde is
    reported as the final multiplier estimate; the truncated ones appear in
    the per-iteration records.
    """
    z_feas = as_vector(params.z_feas, problem.n, "z_feas")
    feas0 = float(np.linalg.norm(problem.constraint(z_feas)))
    if feas0 > params.eps1 / 2.0:
        raise ValueError(
            f"z_feas violates the near-feasibility precondition: "
            f"||c(z_feas)|| = {feas0:.3e} > eps1/2 = {params.eps1 / 2.0:.3e}")
    counts_before = problem.total_counts()

    c_shift = problem.constraint(z_feas)
    x_k = as_vector(params.x0, problem.n, "x0").copy()
    lam_k = as_vector(params.lambda0, problem.m, "lambda0").copy()
    rho_k = float(params.rho0)
    rho_trace = [rho_k]
    ctilde_norm_trace: list[float] = []
    outer_records: list[AlOuterRecord] = []
    inner_reports: list[NewtonCgReport] = []
    ctilde_curr_norm: float | None = None
    lam_tilde = lam_k.copy()

    status = AlStatus.OUTER_LIMIT
    outer_iters = 0
    for k in range(params.max_outer):
        outer_iters = k + 1
        tau_g, tau_H = tolerance_schedule(k, params.eps1, params.eps2, params.r)
        al = al_function(problem, lam_k, rho_k, z_feas)
        f_z = problem.f.value(z_feas)
        x_init = x_k if al.value(x_k) <= f_z else z_feas.copy()
        warm_started = x_init is not x_k

        inner_params = replace(params.inner, eps_g=tau_g, eps_H=tau_H,
                               delta=params.delta,
                               first_order_only=params.fosp_only,
                               seed=params.inner.seed + k)
        inner = newton_cg(al, x_init, inner_params)
        inner_reports.append(inner)
        if inner.status not in (SolveStatus.SECOND_ORDER_POINT,
                                SolveStatus.FIRST_ORDER_POINT):
            raise SubproblemFailure(
                f"inner solve at outer iteration {k} ended with status "
                f"{inner.status.value}", k, inner)
        x_next = inner.x_final

        ct_next = problem.constraint(x_next) - c_shift
        ct_next_norm = float(np.linalg.norm(ct_next))
        c_next_norm = float(np.linalg.norm(problem.constraint(x_next)))
        lam_tilde, lam_proj = multiplier_update(lam_k, rho_k, ct_next,
                                                params.lambda_max)

        al_value = al.value(x_next)
        if al_value > f_z + 1e-9 * (1.0 + abs(f_z)):
            # descent from the warm start guarantees this; failure means the
            # inner solver violated its own contract
            raise SubproblemFailure(
                f"accepted subproblem iterate exceeds the f(z_feas) threshold "
                f"({al_value:.6e} > {f_z:.6e})", k, inner)
        outer_records.append(AlOuterRecord(
            k=k, tau_g=tau_g, tau_H=tau_H, rho=rho_k, warm_started=warm_started,
            al_value=al_value, al_grad_norm=inner.grad_norm_final,
            ctilde_norm=ct_next_norm, c_norm=c_next_norm,
            lambda_tilde=lam_tilde.copy(), lambda_trunc=lam_proj.copy(),
            inner_iterations=len(inner.trace), inner_status=inner.status))
        ctilde_norm_trace.append(ct_next_norm)

        if tau_g <= params.eps1 and tau_H <= params.eps2 and c_next_norm <= params.eps1:
            x_k = x_next
            status = AlStatus.CONVERGED
            break

        lam_k = lam_proj
        rho_next = penalty_update(rho_k, ct_next_norm,
                                  ctilde_curr_norm if ctilde_curr_norm is not None else 0.0,
                                  params.alpha, params.r, k)
        ctilde_curr_norm = ct_next_norm
        x_k = x_next
        rho_k = rho_next
        rho_trace.append(rho_k)

    fosp_grad, feasibility = check_fosp(problem, x_k, lam_tilde)
    sosp = None
    if not params.fosp_only and problem.n <= params.dense_cap:
        sosp = check_sosp(problem, x_k, lam_tilde, cap=params.dense_cap)
    return AlReport(
        x_final=x_k, lambda_tilde_final=lam_tilde, status=status,
        outer_iters=outer_iters, rho_trace=rho_trace,
        ctilde_norm_trace=ctilde_norm_trace, outer_records=outer_records,
        inner_reports=inner_reports,
        residuals=AlResiduals(fosp_grad, feasibility, sosp),
        eval_counts=problem.total_counts() - counts_before)
