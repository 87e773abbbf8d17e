"""Newton-CG minimizer with negative-curvature exploitation.

Each iteration either solves the damped Newton system with capped CG (when
the gradient is large) or consults a minimum-eigenvalue oracle (when it is
small). Negative-curvature directions from either source are rescaled so
their curvature equals their length, then driven through a cubic-decrease
backtracking search; approximate Newton solutions use a quadratic-decrease
search instead. The ``cubic_always`` line-search mode applies the cubic
criterion to both direction types, for benchmarking against the hybrid rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .capped_cg import NC, SOL, CgParams, capped_cg
from .meo import CERTIFICATE, MeoParams, exact_meo, lanczos_meo
from .operators import DENSE_CAP, EvalCounts, SmoothFunction, SymmetricOperator, as_vector, fd_check

EXACT = "exact"
RANDOMIZED = "randomized"
HYBRID = "hybrid"
CUBIC_ALWAYS = "cubic_always"

MEO_NC = "MEO-NC"


class SolveStatus(str, Enum):
    SECOND_ORDER_POINT = "second_order_point"
    FIRST_ORDER_POINT = "first_order_point"
    ITER_LIMIT = "iter_limit"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass
class NewtonCgParams:
    eps_g: float
    eps_H: float
    theta: float = 0.8
    zeta: float = 0.5
    eta: float = 0.2
    delta: float = 0.01
    oracle: str = EXACT
    line_search: str = HYBRID
    max_outer_iters: int = 100_000
    max_backtracks: int = 200
    seed: int = 0
    first_order_only: bool = False
    dense_cap: int = DENSE_CAP

    def __post_init__(self):
        # tolerances admit 1.0: the outer AL schedule starts there at k = 0
        for name in ("eps_g", "eps_H"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {val}")
        for name in ("theta", "zeta", "eta", "delta"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")
        if self.oracle not in (EXACT, RANDOMIZED):
            raise ValueError(f"unknown oracle {self.oracle!r}")
        if self.line_search not in (HYBRID, CUBIC_ALWAYS):
            raise ValueError(f"unknown line_search {self.line_search!r}")


@dataclass
class StepRecord:
    t: int
    direction: str  # SOL, NC, or MEO-NC
    alpha: float
    backtracks: int
    f_value: float  # objective at the iterate the step left from
    grad_norm: float
    cg_iterations: int = 0
    # the iterate the step left from and the (rescaled) step direction, kept
    # so direction certificates can be re-verified from the trace
    x_before: np.ndarray | None = None
    direction_vector: np.ndarray | None = None


@dataclass
class NewtonCgReport:
    x_final: np.ndarray
    f_final: float
    grad_norm_final: float
    status: SolveStatus
    trace: list[StepRecord]
    iterations: int  # outer loop passes, including the terminating one
    eval_counts: EvalCounts
    meo_certificate: bool
    diagnostics: dict | None = None


class LineSearchError(RuntimeError):
    """Backtracking exhausted its budget; usually a sign of bad derivatives."""

    def __init__(self, message: str, backtracks: int):
        super().__init__(message)
        self.backtracks = backtracks


def negcurve_rescale(d, g, H: SymmetricOperator) -> np.ndarray:
    """Rescale a negative-curvature direction to unit curvature-to-length ratio.

    Returns -sgn(d'g) * (|d'Hd| / ||d||^3) * d, with sgn(0) = +1, so the
    output d* satisfies d*'g <= 0 and d*'Hd*/||d*||^2 = -||d*||. A unit-norm
    oracle direction is just the ||d|| = 1 case of the same formula.
    """
    d = as_vector(d, H.dimension, "d")
    g = as_vector(g, H.dimension, "g")
    curv = float(d @ H.apply(d))
    if curv >= 0.0:
        raise ValueError("negcurve_rescale requires d'Hd < 0")
    sign = 1.0 if float(d @ g) >= 0.0 else -1.0
    d_norm = float(np.linalg.norm(d))
    return (-sign * abs(curv) / d_norm ** 3) * d


def line_search_sol(F: SmoothFunction, x, d, theta: float, eta: float,
                    eps_H: float, max_backtracks: int,
                    f_x: float | None = None) -> tuple[float, int, float]:
    """Quadratic-decrease backtracking for approximate Newton directions.

    Accepts the smallest j >= 0 with
    F(x + theta^j d) < F(x) - eta * eps_H * theta^(2j) * ||d||^2,
    returning (alpha, j, F at the accepted point).
    """
    x = as_vector(x, F.dimension)
    d = as_vector(d, F.dimension, "d")
    if f_x is None:
        f_x = F.value(x)
    d_sq = float(d @ d)
    for j in range(max_backtracks + 1):
        alpha = theta ** j
        f_trial = F.value(x + alpha * d)
        if f_trial < f_x - eta * eps_H * alpha * alpha * d_sq:
            return alpha, j, f_trial
    raise LineSearchError("quadratic-decrease search exhausted its backtracking budget",
                          max_backtracks)


def line_search_nc(F: SmoothFunction, x, d, theta: float, eta: float,
                   max_backtracks: int,
                   f_x: float | None = None) -> tuple[float, int, float]:
    """Cubic-decrease backtracking for negative-curvature directions.

    Accepts the smallest j >= 0 with
    F(x + theta^j d) < F(x) - eta * theta^(2j) * ||d||^3 / 2.
    """
    x = as_vector(x, F.dimension)
    d = as_vector(d, F.dimension, "d")
    if f_x is None:
        f_x = F.value(x)
    d_cu = float(np.linalg.norm(d)) ** 3
    for j in range(max_backtracks + 1):
        alpha = theta ** j
        f_trial = F.value(x + alpha * d)
        if f_trial < f_x - 0.5 * eta * alpha * alpha * d_cu:
            return alpha, j, f_trial
    raise LineSearchError("cubic-decrease search exhausted its backtracking budget",
                          max_backtracks)


def newton_cg(F: SmoothFunction, u0, params: NewtonCgParams) -> NewtonCgReport:
    """Minimize F from u0 until the gradient and curvature tolerances hold.

    Termination with ``SECOND_ORDER_POINT`` means ||grad F|| <= eps_g holds
    deterministically at the output and the configured oracle issued a
    certificate that lambda_min(hessian) >= -eps_H (deterministic for the
    exact oracle, with probability >= 1 - delta for the randomized one).
    """
    x = as_vector(u0, F.dimension).copy()
    counts_before = F.counts.copy()
    rng = np.random.default_rng(params.seed)
    trace: list[StepRecord] = []
    f_x = F.value(x)

    def report(status: SolveStatus, iterations: int, g_norm: float,
               certified: bool = False, diagnostics: dict | None = None) -> NewtonCgReport:
        return NewtonCgReport(
            x_final=x, f_final=f_x, grad_norm_final=g_norm, status=status,
            trace=trace, iterations=iterations,
            eval_counts=F.counts - counts_before,
            meo_certificate=certified, diagnostics=diagnostics)

    for t in range(params.max_outer_iters):
        g = F.gradient(x)
        g_norm = float(np.linalg.norm(g))
        H = F.hessian_operator(x)
        cg_iters = 0
        if g_norm > params.eps_g:
            out = capped_cg(H, g, CgParams(eps=params.eps_H, zeta=params.zeta))
            cg_iters = out.iterations
            if out.d_type == NC:
                d = negcurve_rescale(out.d, g, H)
                kind = NC
            else:
                d = out.d
                kind = SOL
        else:
            if params.first_order_only:
                return report(SolveStatus.FIRST_ORDER_POINT, t + 1, g_norm)
            if params.oracle == EXACT:
                meo = exact_meo(H, params.eps_H, cap=params.dense_cap)
            else:
                meo = lanczos_meo(H, MeoParams(eps=params.eps_H, delta=params.delta,
                                               seed=int(rng.integers(2 ** 63))))
            if meo.kind == CERTIFICATE:
                return report(SolveStatus.SECOND_ORDER_POINT, t + 1, g_norm, certified=True)
            d = negcurve_rescale(meo.v, g, H)
            kind = MEO_NC
        try:
            if kind == SOL and params.line_search == HYBRID:
                alpha, j, f_new = line_search_sol(
                    F, x, d, params.theta, params.eta, params.eps_H,
                    params.max_backtracks, f_x=f_x)
            else:
                alpha, j, f_new = line_search_nc(
                    F, x, d, params.theta, params.eta, params.max_backtracks, f_x=f_x)
        except LineSearchError as err:
            grad_err, hvp_err = fd_check(F, x)
            diag = {"backtracks": err.backtracks, "direction": kind,
                    "direction_norm": float(np.linalg.norm(d)),
                    "fd_grad_err": grad_err, "fd_hvp_err": hvp_err}
            return report(SolveStatus.LINE_SEARCH_FAIL, t + 1, g_norm, diagnostics=diag)
        trace.append(StepRecord(t, kind, alpha, j, f_x, g_norm, cg_iters,
                                x_before=x, direction_vector=d))
        x = x + alpha * d
        f_x = f_new

    g_norm = float(np.linalg.norm(F.gradient(x)))
    return report(SolveStatus.ITER_LIMIT, params.max_outer_iters, g_norm)
