"""Minimum-eigenvalue oracles: randomized Lanczos and a deterministic eigensolve.

Both oracles answer the same question about a symmetric operator H: either
produce a unit vector v with v'Hv <= -eps/2, or certify that
lambda_min(H) >= -eps (probabilistically for the Lanczos oracle, exactly for
the dense one).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, sqrt

import numpy as np

from .operators import DENSE_CAP, SymmetricOperator, dense_materialize

CERTIFICATE = "certificate"
NEGATIVE_CURVATURE = "negative_curvature"

_BREAKDOWN_TOL = 1e-12


@dataclass
class MeoParams:
    eps: float
    delta: float
    norm_estimate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass
class MeoOutcome:
    kind: str  # CERTIFICATE or NEGATIVE_CURVATURE
    v: np.ndarray | None
    iterations: int
    lambda_estimate: float


def estimate_operator_norm(H: SymmetricOperator, seed: int = 0,
                           iters: int = 10, inflation: float = 1.1) -> float:
    """Upper-biased power-iteration estimate of the spectral norm of H."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.dimension)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        hv = H.apply(v)
        estimate = float(np.linalg.norm(hv))
        if estimate == 0.0:
            return 0.0
        v = hv / estimate
    return inflation * estimate


def iteration_cap(n: int, eps: float, delta: float, norm_h: float) -> int:
    """Lanczos budget min{n, 1 + ceil(ln(2.75 n / delta^2)/2 * sqrt(||H||/eps))}."""
    if norm_h <= 0.0:
        return 1
    budget = 1 + ceil(log(2.75 * n / delta ** 2) / 2.0 * sqrt(norm_h / eps))
    return min(n, budget)


def _smallest_ritz(alphas: list[float], betas: list[float]) -> tuple[float, np.ndarray]:
    k = len(alphas)
    t = np.diag(alphas)
    if betas:
        off = np.array(betas)
        t += np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(t)
    return float(vals[0]), vecs[:, 0]


def lanczos_meo(H: SymmetricOperator, params: MeoParams) -> MeoOutcome:
    """Randomized Lanczos from a uniform random unit start vector.

    Full reorthogonalization is used (cheap at these sizes, and it removes
    ghost-eigenvalue failures). After every iteration the smallest Ritz pair
    of the tridiagonal block is computed; a candidate with Ritz value at most
    -eps/2 is lifted to the ambient space and certified directly against H
    before being returned. Without such a direction within the iteration cap,
    the run ends with a (probabilistic) certificate that
    lambda_min(H) >= -eps.
    """
    n = H.dimension
    if n < 1:
        raise ValueError("operator dimension must be at least 1")
    rng = np.random.default_rng(params.seed)
    norm_h = params.norm_estimate
    if norm_h is None:
        norm_h = estimate_operator_norm(H, seed=int(rng.integers(2 ** 63)))
    cap = iteration_cap(n, params.eps, params.delta, norm_h)

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    basis = np.empty((n, cap))
    alphas: list[float] = []
    betas: list[float] = []
    theta = np.inf
    iterations = 0
    for j in range(cap):
        basis[:, j] = q
        u = H.apply(q)
        iterations += 1
        alphas.append(float(q @ u))
        theta, w = _smallest_ritz(alphas, betas)
        if theta <= -params.eps / 2.0:
            v = basis[:, :j + 1] @ w
            v /= np.linalg.norm(v)
            curv = float(v @ H.apply(v))
            if curv <= -params.eps / 2.0:
                return MeoOutcome(NEGATIVE_CURVATURE, v, iterations, curv)
        r = u - alphas[-1] * q
        if betas:
            r -= betas[-1] * basis[:, j - 1]
        # full reorthogonalization against all stored Lanczos vectors
        r -= basis[:, :j + 1] @ (basis[:, :j + 1].T @ r)
        b = float(np.linalg.norm(r))
        if b < _BREAKDOWN_TOL * max(1.0, norm_h):
            break  # Krylov subspace is invariant; the block decides
        betas.append(b)
        q = r / b
    return MeoOutcome(CERTIFICATE, None, iterations, theta)


def exact_meo(H: SymmetricOperator, eps: float, cap: int = DENSE_CAP) -> MeoOutcome:
    """Deterministic oracle: dense eigensolve of the materialized operator.

    Deterministic bit-for-bit given H: the eigenvector sign is fixed so its
    largest-magnitude entry is positive.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    mat = dense_materialize(H, cap=cap)
    vals, vecs = np.linalg.eigh(mat)
    lam = float(vals[0])
    v = vecs[:, 0]
    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0.0:
        v = -v
    v = v / np.linalg.norm(v)
    if lam < -eps / 2.0:
        curv = float(v @ H.apply(v))
        if curv <= -eps / 2.0:
            return MeoOutcome(NEGATIVE_CURVATURE, v, H.dimension, lam)
    return MeoOutcome(CERTIFICATE, None, H.dimension, lam)
