"""Benchmark problem builders with analytic derivatives and seeded generation.

The regression loss is phi(t) = t^2 / (1 + t^2), a bounded redescending
penalty, with a quartic regularizer mu * ||x||_4^4. Derivatives:

    phi'(t)  = 2t / (1 + t^2)^2
    phi''(t) = 2(1 - 3 t^2) / (1 + t^2)^3

Both forms are certified against finite differences by the derivative gate
before any benchmark run.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from pathlib import Path

import numpy as np

from .auglag import EqualityProblem
from .operators import SmoothFunction

INSTANCE_FORMAT_VERSION = 1


@dataclass
class RegressionInstance:
    A: np.ndarray  # (m, n), rows are the data vectors
    b: np.ndarray  # (m,)
    mu: float
    seed: int | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("A must be a 2-d matrix")
        if self.b.shape != (self.A.shape[0],):
            raise ValueError("b length must match the number of rows of A")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("instance data must be finite")
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]


def robust_regression(inst: RegressionInstance) -> SmoothFunction:
    """sum_i phi(a_i'x - b_i) + mu * sum_j x_j^4 as a SmoothFunction."""
    A, b, mu = inst.A, inst.b, inst.mu

    def value(x):
        t = A @ x - b
        return float(np.sum(t * t / (1.0 + t * t)) + mu * np.sum(x ** 4))

    def gradient(x):
        t = A @ x - b
        dphi = 2.0 * t / (1.0 + t * t) ** 2
        return A.T @ dphi + 4.0 * mu * x ** 3

    def hess_vec(x, v):
        t = A @ x - b
        ddphi = 2.0 * (1.0 - 3.0 * t * t) / (1.0 + t * t) ** 3
        return A.T @ (ddphi * (A @ v)) + 12.0 * mu * (x * x) * v

    return SmoothFunction(inst.n, value, gradient, hess_vec)


def _sphere_problem(f: SmoothFunction, n: int) -> EqualityProblem:
    # c(x) = ||x||^2 - 1, grad c = 2x, hess c = 2I
    return EqualityProblem(
        n, 1, f,
        constraint_fn=lambda x: np.array([float(x @ x) - 1.0]),
        jacobian_tvec_fn=lambda x, w: 2.0 * w[0] * x,
        jacobian_vec_fn=lambda x, v: np.array([2.0 * float(x @ v)]),
        constraint_hess_vec_fn=lambda x, w, v: 2.0 * w[0] * v,
    )


def sphere_constrained(inst: RegressionInstance) -> EqualityProblem:
    """The regression objective constrained to the unit sphere ||x||^2 = 1."""
    return _sphere_problem(robust_regression(inst), inst.n)


def linear_sphere_problem(n: int) -> EqualityProblem:
    """Test hook: minimize x_1 on the unit sphere (analytic solution -e_1).

    The maximizer e_1 is a stationary point whose tangent-space curvature is
    negative, so a solver must escape it to reach the true minimizer.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    e1 = np.zeros(n)
    e1[0] = 1.0
    f = SmoothFunction(
        n,
        value_fn=lambda x: float(x[0]),
        gradient_fn=lambda x: e1.copy(),
        hess_vec_fn=lambda x, v: np.zeros(n),
    )
    return _sphere_problem(f, n)


def random_instance(n: int, m: int, mu: float, seed: int) -> RegressionInstance:
    """Seeded instance: A and bbar standard normal, b = 2*m*bbar.

    Uses numpy's default generator (PCG64), so instances are reproducible
    across runs and platforms for a fixed numpy version. Draw order is fixed:
    A row-major first, then bbar.
    """
    if n < 1 or m < 1:
        raise ValueError("need n, m >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    bbar = rng.standard_normal(m)
    return RegressionInstance(A=A, b=2.0 * m * bbar, mu=mu, seed=seed)


def feasible_seed_point(n: int) -> np.ndarray:
    """(1/sqrt(n), ..., 1/sqrt(n)): exactly on the unit sphere."""
    if n < 1:
        raise ValueError("need n >= 1")
    return np.full(n, 1.0 / sqrt(n))


def save_instance(inst: RegressionInstance, path) -> None:
    """Write an instance to the documented text format.

    Line 1: format tag and version. Line 2: m n. Line 3: mu. Line 4: seed
    (or "none"). Then m lines of n entries (rows of A), then one line of m
    entries (b). Floats use 17 significant digits, so round-trips are exact.
    """
    lines = [f"ncgal-instance v{INSTANCE_FORMAT_VERSION}",
             f"{inst.m} {inst.n}",
             format(inst.mu, ".17g"),
             "none" if inst.seed is None else str(inst.seed)]
    for row in inst.A:
        lines.append(" ".join(format(v, ".17g") for v in row))
    lines.append(" ".join(format(v, ".17g") for v in inst.b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(path) -> RegressionInstance:
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split()
    if header[0] != "ncgal-instance" or header[1] != f"v{INSTANCE_FORMAT_VERSION}":
        raise ValueError(f"unrecognized instance header: {text[0]!r}")
    m, n = (int(tok) for tok in text[1].split())
    mu = float(text[2])
    seed = None if text[3] == "none" else int(text[3])
    if len(text) != 4 + m + 1:
        raise ValueError("instance file has the wrong number of lines")
    A = np.array([[float(tok) for tok in text[4 + i].split()] for i in range(m)])
    if A.shape != (m, n):
        raise ValueError("matrix block does not match the declared dimensions")
    b = np.array([float(tok) for tok in text[4 + m].split()])
    return RegressionInstance(A=A, b=b, mu=mu, seed=seed)
