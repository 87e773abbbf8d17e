"""Capped conjugate gradient for damped, possibly indefinite Newton systems.

Runs CG on (H + 2*eps*I) d = -g while monitoring the curvature revealed along
the way. It terminates either with an approximate solution of the damped
system (type ``SOL``) or with a direction of sufficiently negative curvature
of H itself (type ``NC``, certified by d'Hd < -eps*||d||^2). The residual
blow-up test uses a condition-number surrogate kappa derived from a running
upper estimate U of ||H||, which is raised whenever one of the monitored
products Hp, Hy, Hr exceeds it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .operators import SymmetricOperator, as_vector

SOL = "SOL"
NC = "NC"


@dataclass
class CgParams:
    """Damping eps, relative accuracy zeta, optional initial norm bound U."""

    eps: float
    zeta: float
    u_init: float = 0.0
    max_iters: int | None = None  # defaults to 20*n + 200 at call time

    def __post_init__(self):
        # 1.0 admitted: the AL tolerance schedule starts there at k = 0
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        if not 0.0 < self.zeta < 1.0:
            raise ValueError("zeta must lie in (0, 1)")
        if self.u_init < 0.0:
            raise ValueError("u_init must be nonnegative")


@dataclass
class CgOutcome:
    """Direction plus certificate metadata from a capped CG run."""

    d_type: str  # SOL or NC
    d: np.ndarray
    iterations: int
    u_final: float
    kappa: float
    zeta_hat: float
    tau: float
    t_cap: float


class CappedCgError(RuntimeError):
    """Safeguard trip: no termination branch fired within the iteration cap.

    Finite termination is guaranteed in exact arithmetic, so hitting the cap
    signals numerical breakdown; partial state is attached for diagnosis.
    """

    def __init__(self, message: str, iterations: int, residual_norm: float, u_final: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.u_final = u_final


def _derived(u: float, eps: float, zeta: float) -> tuple[float, float, float, float]:
    # kappa, zeta_hat, tau, T recomputed whenever U is raised
    kappa = (u + 2.0 * eps) / eps
    zeta_hat = zeta / (3.0 * kappa)
    tau = sqrt(kappa) / (sqrt(kappa) + 1.0)
    t_cap = 4.0 * kappa ** 4 / (1.0 - sqrt(tau)) ** 2
    return kappa, zeta_hat, tau, t_cap


def capped_cg(H: SymmetricOperator, g, params: CgParams) -> CgOutcome:
    """Solve (H + 2*eps*I) d = -g approximately or return negative curvature.

    Termination branches are checked in a fixed order each iteration: negative
    curvature along y, residual small enough (SOL), negative curvature along
    p, then residual growth past sqrt(T)*tau^(j/2) which forces a scan of the
    iterate history for a curvature witness. The full y history (and the
    matching H*y products) is retained to make that scan matrix-free.
    """
    eps, zeta = params.eps, params.zeta
    n = H.dimension
    g = as_vector(g, n, "g")
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        raise ValueError("capped CG requires a nonzero right-hand side g")
    max_iters = params.max_iters if params.max_iters is not None else 20 * n + 200

    u = float(params.u_init)
    kappa, zeta_hat, tau, t_cap = _derived(u, eps, zeta)

    y = np.zeros(n)
    r = g.copy()
    p = -g
    hp = H.apply(p)
    hy = np.zeros(n)

    def outcome(d_type: str, d: np.ndarray, j: int) -> CgOutcome:
        return CgOutcome(d_type, d, j, u, kappa, zeta_hat, tau, t_cap)

    # pre-loop check on p0 = -g
    p_hbar_p = float(p @ hp) + 2.0 * eps * float(p @ p)
    if p_hbar_p < eps * float(p @ p):
        return outcome(NC, p, 0)
    hp_norm = float(np.linalg.norm(hp))
    if hp_norm > u * g_norm:  # ||p0|| = ||g||
        u = hp_norm / g_norm
        kappa, zeta_hat, tau, t_cap = _derived(u, eps, zeta)

    ys = [y]
    hys = [hy]
    r_sq = float(r @ r)
    j = 0
    while j < max_iters:
        alpha = r_sq / p_hbar_p
        y = y + alpha * p
        hy = hy + alpha * hp  # H y maintained from the stored H p
        hbar_p = hp + 2.0 * eps * p
        r = r + alpha * hbar_p
        r_sq_new = float(r @ r)
        beta = r_sq_new / r_sq
        p = -r + beta * p
        r_sq = r_sq_new
        j += 1

        hp = H.apply(p)
        hr = H.apply(r)  # third monitor costs one extra product per iteration
        p_norm = float(np.linalg.norm(p))
        y_norm = float(np.linalg.norm(y))
        r_norm = float(np.linalg.norm(r))
        for prod_norm, vec_norm in ((float(np.linalg.norm(hp)), p_norm),
                                    (float(np.linalg.norm(hy)), y_norm),
                                    (float(np.linalg.norm(hr)), r_norm)):
            if prod_norm > u * vec_norm:
                u = prod_norm / vec_norm
                kappa, zeta_hat, tau, t_cap = _derived(u, eps, zeta)

        ys.append(y)
        hys.append(hy)

        y_hbar_y = float(y @ hy) + 2.0 * eps * y_norm ** 2
        p_hbar_p = float(p @ hp) + 2.0 * eps * p_norm ** 2
        if y_hbar_y < eps * y_norm ** 2:
            return outcome(NC, y, j)
        if r_norm <= zeta_hat * g_norm:
            return outcome(SOL, y, j)
        if p_hbar_p < eps * p_norm ** 2:
            return outcome(NC, p, j)
        if r_norm > sqrt(t_cap) * tau ** (j / 2.0) * g_norm:
            # residual grew too fast for a well-conditioned damped system;
            # some pair of iterates must witness curvature below eps
            alpha = r_sq / p_hbar_p
            y_next = y + alpha * p
            hy_next = hy + alpha * hp
            for i in range(j):
                dy = y_next - ys[i]
                hdy = hy_next - hys[i]
                dy_sq = float(dy @ dy)
                if float(dy @ hdy) + 2.0 * eps * dy_sq < eps * dy_sq:
                    return outcome(NC, dy, j)
            raise CappedCgError(
                "residual growth detected but no curvature witness found "
                "(numerical breakdown)", j, r_norm, u)

    raise CappedCgError(
        f"no termination within {max_iters} iterations (numerical breakdown)",
        j, float(np.linalg.norm(r)), u)


def validate_sol(H: SymmetricOperator, g, eps: float, zeta: float, d,
                 rtol: float = 1e-8) -> bool:
    """Check the four certificates an approximate damped-system solution obeys.

    For a SOL direction d of (H + 2*eps*I) d = -g:
      (1) eps*||d||^2 <= d'(H + 2*eps*I)d
      (2) ||d|| <= 1.1 * ||g|| / eps
      (3) d'g == -d'(H + 2*eps*I)d
      (4) ||(H + 2*eps*I)d + g|| <= eps*zeta*||d||/2
    within ``rtol`` relative tolerance. The identity (3) is exact only in
    exact arithmetic; in floating point its gap is d'(residual), and once CG
    converges deeply the iterate loses orthogonality to the residual, so (3)
    is asserted up to the terminal-residual budget eps*zeta*||d||^2/2 implied
    by (4). That is the form the descent argument consumes:
    d'g <= -eps*(1 - zeta/2)*||d||^2 still follows.
    """
    g = as_vector(g, H.dimension, "g")
    d = as_vector(d, H.dimension, "d")
    hd = H.apply(d)
    hbar_d = hd + 2.0 * eps * d
    d_norm = float(np.linalg.norm(d))
    g_norm = float(np.linalg.norm(g))
    quad = float(d @ hbar_d)
    slack = rtol * (1.0 + abs(quad) + d_norm ** 2)
    if eps * d_norm ** 2 > quad + slack:
        return False
    if d_norm > 1.1 * g_norm / eps + rtol * (1.0 + g_norm / eps):
        return False
    dg = float(d @ g)
    identity_budget = eps * zeta * d_norm ** 2 / 2.0
    if abs(dg + quad) > identity_budget + rtol * (1.0 + abs(dg) + abs(quad)):
        return False
    resid = float(np.linalg.norm(hbar_d + g))
    if resid > eps * zeta * d_norm / 2.0 + rtol * (1.0 + g_norm):
        return False
    return True
