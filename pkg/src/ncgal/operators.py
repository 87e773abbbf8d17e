"""Matrix-free symmetric operators and smooth functions with evaluation counting.

Everything downstream (the capped CG solver, the eigenvalue oracles, the
Newton-CG and augmented-Lagrangian drivers) talks to problems exclusively
through the two classes here: ``SymmetricOperator`` for Hessian actions and
``SmoothFunction`` for value/gradient/Hessian-vector evaluation. Both validate
their boundaries (finite entries, matching dimensions) and count every call,
so solver reports can account for work in terms of evaluations and
matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DENSE_CAP = 2000


def as_vector(x, n: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-d float array, checking length when ``n`` is given.

    NaN/Inf at a module boundary is a hard error: line searches and curvature
    tests rely on finite comparisons.
    """
    arr = np.ascontiguousarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _as_scalar(v, name: str) -> float:
    val = float(v)
    if not np.isfinite(val):
        raise ValueError(f"{name} evaluated to a non-finite value")
    return val


@dataclass
class EvalCounts:
    """Monotone counters for the work done against a problem's evaluators."""

    values: int = 0
    gradients: int = 0
    hess_vecs: int = 0
    constraint_evals: int = 0
    jacobian_vecs: int = 0

    def copy(self) -> "EvalCounts":
        return EvalCounts(self.values, self.gradients, self.hess_vecs,
                          self.constraint_evals, self.jacobian_vecs)

    def __sub__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            self.values - other.values,
            self.gradients - other.gradients,
            self.hess_vecs - other.hess_vecs,
            self.constraint_evals - other.constraint_evals,
            self.jacobian_vecs - other.jacobian_vecs,
        )

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            self.values + other.values,
            self.gradients + other.gradients,
            self.hess_vecs + other.hess_vecs,
            self.constraint_evals + other.constraint_evals,
            self.jacobian_vecs + other.jacobian_vecs,
        )


class SymmetricOperator:
    """A symmetric linear map given only by its action on vectors.

    ``apply`` validates dimensions and finiteness on the way in and out and
    increments ``matvec_count`` exactly once per call. The map itself must be
    deterministic for a fixed input; nothing here enforces symmetry, which is
    instead checked by tests (random pairs) and by ``dense_materialize``.
    """

    def __init__(self, dimension: int, apply_fn: Callable[[np.ndarray], np.ndarray]):
        if dimension < 1:
            raise ValueError("operator dimension must be positive")
        self.dimension = int(dimension)
        self._apply_fn = apply_fn
        self.matvec_count = 0

    def apply(self, v) -> np.ndarray:
        v = as_vector(v, self.dimension, "v")
        out = as_vector(self._apply_fn(v), self.dimension, "operator output")
        self.matvec_count += 1
        return out


def operator_from_matrix(mat) -> SymmetricOperator:
    """Wrap a dense symmetric matrix as a matrix-free operator (test helper)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    return SymmetricOperator(mat.shape[0], lambda v: mat @ v)


def dense_materialize(op: SymmetricOperator, cap: int = DENSE_CAP) -> np.ndarray:
    """Materialize ``op`` column by column; refuses above ``cap`` dimensions.

    Intended for test oracles and the deterministic eigenvalue oracle. The
    result is checked to be symmetric to 1e-10 relative; an asymmetric result
    means the operator violated its contract.
    """
    n = op.dimension
    if n > cap:
        raise ValueError(f"dimension {n} exceeds dense materialization cap {cap}")
    cols = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        cols[:, i] = op.apply(e)
        e[i] = 0.0
    scale = 1.0 + np.abs(cols).max(initial=0.0)
    if np.abs(cols - cols.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("operator is not symmetric to 1e-10 under materialization")
    return cols


class SmoothFunction:
    """Value/gradient/Hessian-vector evaluator for a twice-differentiable map.

    The three callables are wrapped with boundary validation and per-instance
    counting. One instance is owned by one solver run at a time; clones over
    immutable problem data may run concurrently.
    """

    def __init__(self, dimension: int,
                 value_fn: Callable[[np.ndarray], float],
                 gradient_fn: Callable[[np.ndarray], np.ndarray],
                 hess_vec_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        if dimension < 1:
            raise ValueError("function dimension must be positive")
        self.dimension = int(dimension)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self._hess_vec_fn = hess_vec_fn
        self.counts = EvalCounts()

    def value(self, x) -> float:
        x = as_vector(x, self.dimension)
        self.counts.values += 1
        return _as_scalar(self._value_fn(x), "value")

    def gradient(self, x) -> np.ndarray:
        x = as_vector(x, self.dimension)
        self.counts.gradients += 1
        return as_vector(self._gradient_fn(x), self.dimension, "gradient")

    def hess_vec(self, x, v) -> np.ndarray:
        x = as_vector(x, self.dimension)
        v = as_vector(v, self.dimension, "v")
        self.counts.hess_vecs += 1
        return as_vector(self._hess_vec_fn(x, v), self.dimension, "hess_vec")

    def hessian_operator(self, x) -> SymmetricOperator:
        """The Hessian at a frozen point ``x`` as a symmetric operator.

        Applications count both on the returned operator and on this
        function's ``hess_vecs`` counter.
        """
        x = as_vector(x, self.dimension).copy()
        return SymmetricOperator(self.dimension, lambda v: self.hess_vec(x, v))


def fd_check(fn: SmoothFunction, x, step: float | None = None,
             probes: int = 5, seed: int = 0) -> tuple[float, float]:
    """Max relative errors of the analytic gradient and Hessian-vector action.

    Central differences of the value check the gradient; central differences
    of the gradient check the Hessian action, both along random unit probe
    directions. Errors are reported, never raised.
    """
    x = as_vector(x, fn.dimension)
    if step is None:
        step = 1e-5 * (1.0 + np.abs(x).max(initial=0.0))
    if step <= 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    g = fn.gradient(x)
    grad_err = 0.0
    hvp_err = 0.0
    for _ in range(probes):
        u = rng.standard_normal(fn.dimension)
        u /= np.linalg.norm(u)
        fd_dir = (fn.value(x + step * u) - fn.value(x - step * u)) / (2.0 * step)
        an_dir = float(g @ u)
        grad_err = max(grad_err, abs(fd_dir - an_dir) / max(1.0, abs(an_dir)))
        fd_hv = (fn.gradient(x + step * u) - fn.gradient(x - step * u)) / (2.0 * step)
        an_hv = fn.hess_vec(x, u)
        hvp_err = max(hvp_err,
                      float(np.linalg.norm(fd_hv - an_hv)) / max(1.0, float(np.linalg.norm(an_hv))))
    return grad_err, hvp_err
