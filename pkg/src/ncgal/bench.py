"""Benchmark harness: seeded instance sweeps with verified residuals.

A run is specified by a declarative config (cells of (n, m, mu), instances
per cell, a base seed, and solver settings). Per-instance seeds are derived
as ``base + cell_index * 10000 + instance_index`` so cells never overlap.
Every run is re-verified from its final iterate (gradient norm for the
unconstrained family, stationarity/feasibility for the constrained one)
rather than trusting solver status flags; rows record the per-instance flags.

Output is deterministic: for a fixed (config, seed) the rendered CSV is
byte-identical across invocations except for the wall-time column. Instances
within a cell may be solved by parallel worker threads (``NCGAL_WORKERS``);
rows are assembled in (cell, instance) order either way.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .auglag import AlParams, AlStatus, al_function, al_solve
from .newton_cg import EXACT, HYBRID, NewtonCgParams, SolveStatus, newton_cg
from .operators import fd_check
from .problems import (
    feasible_seed_point,
    linear_sphere_problem,
    random_instance,
    robust_regression,
    sphere_constrained,
)

UNCONSTRAINED = "unconstrained"
CONSTRAINED = "constrained"
DERIVATIVE_CHECK = "derivative_check"

CSV_HEADER = "n,m,mu,mean_objective,mean_iterations,mean_feasibility,mean_wall_time_s,all_residuals_pass"

WORKERS_ENV = "NCGAL_WORKERS"


@dataclass
class BenchConfig:
    experiment: str
    grid: list[tuple[int, int, float]] = field(default_factory=list)
    instances_per_cell: int = 10
    seed: int = 0
    oracle: str = EXACT
    line_search: str = HYBRID
    # unconstrained tolerances
    eps_g: float = 1e-5
    eps_H: float = 10.0 ** -2.5
    # constrained tolerances and penalty schedule
    eps1: float = 1e-4
    eps2: float = 1e-2
    lambda_max: float = 100.0
    rho0: float = 10.0
    alpha: float = 0.25
    r: float = 10.0
    # shared line-search/CG settings
    theta: float = 0.8
    zeta: float = 0.5
    eta: float = 0.2
    delta: float = 0.01
    problem_family: str = "robust_regression"  # or "linear_sphere" (test hook)
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in (UNCONSTRAINED, CONSTRAINED, DERIVATIVE_CHECK):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.format not in ("csv", "markdown"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.instances_per_cell < 1:
            raise ValueError("instances_per_cell must be positive")
        self.grid = [(int(n), int(m), float(mu)) for n, m, mu in self.grid]


@dataclass
class BenchRow:
    n: int
    m: int
    mu: float
    mean_objective: float
    mean_iterations: float
    mean_feasibility: float | None
    mean_wall_time_s: float
    residual_flags: list[bool]

    @property
    def all_residuals_pass(self) -> bool:
        return all(self.residual_flags)


def instance_seed(base_seed: int, cell_index: int, instance_index: int) -> int:
    return base_seed + cell_index * 10000 + instance_index


def config_from_dict(data: dict) -> BenchConfig:
    data = dict(data)
    if "grid" in data:
        data["grid"] = [tuple(cell) for cell in data["grid"]]
    return BenchConfig(**data)


def load_config(path) -> BenchConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_instances(fn, count: int):
    workers = _workers()
    if workers == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def newton_params_from_config(config: BenchConfig) -> NewtonCgParams:
    return NewtonCgParams(
        eps_g=config.eps_g, eps_H=config.eps_H, theta=config.theta,
        zeta=config.zeta, eta=config.eta, delta=config.delta,
        oracle=config.oracle, line_search=config.line_search,
        seed=config.seed)


def run_unconstrained_bench(config: BenchConfig) -> list[BenchRow]:
    """Solve every seeded instance from the all-ones start and aggregate.

    A run passes verification when it reports a second-order point and the
    recomputed gradient norm at its final iterate is at most eps_g.
    """
    if config.experiment != UNCONSTRAINED:
        raise ValueError("config.experiment must be 'unconstrained'")
    rows = []
    for ci, (n, m, mu) in enumerate(config.grid):
        def solve_one(ii: int, ci=ci, n=n, m=m, mu=mu):
            inst = random_instance(n, m, mu, instance_seed(config.seed, ci, ii))
            F = robust_regression(inst)
            params = newton_params_from_config(config)
            start = time.perf_counter()
            report = newton_cg(F, np.ones(n), params)
            wall = time.perf_counter() - start
            grad_norm = float(np.linalg.norm(F.gradient(report.x_final)))
            ok = (report.status == SolveStatus.SECOND_ORDER_POINT
                  and grad_norm <= config.eps_g)
            return report.f_final, report.iterations, wall, ok
        results = _map_instances(solve_one, config.instances_per_cell)
        rows.append(BenchRow(
            n=n, m=m, mu=mu,
            mean_objective=float(np.mean([r[0] for r in results])),
            mean_iterations=float(np.mean([r[1] for r in results])),
            mean_feasibility=None,
            mean_wall_time_s=float(np.mean([r[2] for r in results])),
            residual_flags=[r[3] for r in results]))
    return rows


def run_constrained_bench(config: BenchConfig) -> list[BenchRow]:
    """Solve the spherically constrained cells and aggregate.

    A run passes verification when it converged and the recomputed
    stationarity and feasibility residuals are both at most eps1.
    """
    if config.experiment != CONSTRAINED:
        raise ValueError("config.experiment must be 'constrained'")
    rows = []
    for ci, (n, m, mu) in enumerate(config.grid):
        def solve_one(ii: int, ci=ci, n=n, m=m, mu=mu):
            if config.problem_family == "linear_sphere":
                problem = linear_sphere_problem(n)
            else:
                inst = random_instance(n, m, mu, instance_seed(config.seed, ci, ii))
                problem = sphere_constrained(inst)
            z = feasible_seed_point(n)
            inner = NewtonCgParams(
                eps_g=config.eps1, eps_H=config.eps2, theta=config.theta,
                zeta=config.zeta, eta=config.eta, delta=config.delta,
                oracle=config.oracle, line_search=config.line_search,
                seed=config.seed)
            params = AlParams(
                eps1=config.eps1, eps2=config.eps2,
                lambda_max=config.lambda_max, rho0=config.rho0,
                alpha=config.alpha, r=config.r, z_feas=z, x0=z.copy(),
                lambda0=np.zeros(1), inner=inner, delta=config.delta)
            start = time.perf_counter()
            report = al_solve(problem, params)
            wall = time.perf_counter() - start
            ok = (report.status == AlStatus.CONVERGED
                  and report.residuals.fosp_grad <= config.eps1
                  and report.residuals.feasibility <= config.eps1)
            objective = problem.f.value(report.x_final)
            return objective, report.total_inner_iterations, report.residuals.feasibility, wall, ok
        results = _map_instances(solve_one, config.instances_per_cell)
        rows.append(BenchRow(
            n=n, m=m, mu=mu,
            mean_objective=float(np.mean([r[0] for r in results])),
            mean_iterations=float(np.mean([r[1] for r in results])),
            mean_feasibility=float(np.mean([r[2] for r in results])),
            mean_wall_time_s=float(np.mean([r[3] for r in results])),
            residual_flags=[r[4] for r in results]))
    return rows


@dataclass
class DerivativeCheckItem:
    family: str
    n: int
    m: int
    mu: float
    seed: int
    grad_err: float
    hvp_err: float
    passed: bool


@dataclass
class DerivativeGateResult:
    checks: list[DerivativeCheckItem]
    threshold: float

    @property
    def all_pass(self) -> bool:
        return all(item.passed for item in self.checks)


def run_derivative_check(config: BenchConfig, threshold: float = 1e-5,
                         points: int = 10) -> DerivativeGateResult:
    """Gate check: finite-difference validation of every builder's derivatives.

    For each grid cell, checks the regression objective at random points and
    the augmented Lagrangian of the sphere-constrained variant at random
    (lambda, rho, x).
    """
    checks = []
    for ci, (n, m, mu) in enumerate(config.grid):
        seed = instance_seed(config.seed, ci, 0)
        inst = random_instance(n, m, mu, seed)
        rng = np.random.default_rng(seed + 1)
        worst_g, worst_h = 0.0, 0.0
        F = robust_regression(inst)
        for _ in range(points):
            x = rng.standard_normal(n)
            ge, he = fd_check(F, x, seed=int(rng.integers(2 ** 31)))
            worst_g, worst_h = max(worst_g, ge), max(worst_h, he)
        checks.append(DerivativeCheckItem(
            "robust_regression", n, m, mu, seed, worst_g, worst_h,
            worst_g <= threshold and worst_h <= threshold))
        problem = sphere_constrained(inst)
        worst_g, worst_h = 0.0, 0.0
        for _ in range(points):
            lam = rng.standard_normal(1)
            rho = float(rng.uniform(0.5, 50.0))
            x = rng.standard_normal(n)
            z = feasible_seed_point(n)
            al = al_function(problem, lam, rho, z)
            ge, he = fd_check(al, x, seed=int(rng.integers(2 ** 31)))
            worst_g, worst_h = max(worst_g, ge), max(worst_h, he)
        checks.append(DerivativeCheckItem(
            "sphere_augmented_lagrangian", n, m, mu, seed, worst_g, worst_h,
            worst_g <= threshold and worst_h <= threshold))
    return DerivativeGateResult(checks=checks, threshold=threshold)


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return format(value, ".12g")


def render_csv(rows: list[BenchRow]) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            str(row.n), str(row.m), _fmt(row.mu),
            _fmt(row.mean_objective), _fmt(row.mean_iterations),
            _fmt(row.mean_feasibility), _fmt(row.mean_wall_time_s),
            "true" if row.all_residuals_pass else "false"]))
    return "\n".join(lines) + "\n"


def render_markdown(rows: list[BenchRow]) -> str:
    lines = [
        "| n | m | mu | mean objective | mean iterations | mean feasibility | mean wall time (s) | residuals pass |",
        "| --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append("| " + " | ".join([
            str(row.n), str(row.m), _fmt(row.mu),
            _fmt(row.mean_objective), _fmt(row.mean_iterations),
            _fmt(row.mean_feasibility) or "-", _fmt(row.mean_wall_time_s),
            "yes" if row.all_residuals_pass else "no"]) + " |")
    return "\n".join(lines) + "\n"


def emit_report(rows: list[BenchRow], fmt: str, path) -> None:
    if fmt == "csv":
        text = render_csv(rows)
    elif fmt == "markdown":
        text = render_markdown(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    Path(path).write_text(text)
