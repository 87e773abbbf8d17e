"""FastAPI service wrapping the solver package.

Endpoints mirror the CLI subcommands: single solves, the two benchmark
sweeps, and the derivative gate. All numerical work happens in the core
package; this layer only translates between pydantic models and the solver
dataclasses.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..auglag import AlParams, AlStatus, al_solve
from ..bench import (
    CONSTRAINED,
    UNCONSTRAINED,
    BenchConfig,
    BenchRow,
    run_constrained_bench,
    run_derivative_check,
    run_unconstrained_bench,
)
from ..newton_cg import NewtonCgParams, SolveStatus, newton_cg
from ..operators import EvalCounts
from ..problems import (
    RegressionInstance,
    feasible_seed_point,
    random_instance,
    robust_regression,
    sphere_constrained,
)
from .schemas import (
    BenchRequest,
    BenchResponse,
    BenchRowModel,
    DerivativeCheckItemModel,
    DerivativeCheckRequest,
    DerivativeCheckResponse,
    EvalCountsModel,
    HealthResponse,
    SolveRequest,
    SolveResponse,
    TraceRecord,
)


def _instance_from_spec(spec) -> RegressionInstance:
    if spec.A is not None:
        return RegressionInstance(A=np.array(spec.A, dtype=float),
                                  b=np.array(spec.b, dtype=float),
                                  mu=spec.mu, seed=spec.seed)
    return random_instance(spec.n, spec.m, spec.mu, spec.seed)


def _counts_model(counts: EvalCounts) -> EvalCountsModel:
    return EvalCountsModel(values=counts.values, gradients=counts.gradients,
                           hess_vecs=counts.hess_vecs,
                           constraint_evals=counts.constraint_evals,
                           jacobian_vecs=counts.jacobian_vecs)


def _trace_models(trace) -> list[TraceRecord]:
    return [TraceRecord(t=r.t, direction=r.direction, alpha=r.alpha,
                        backtracks=r.backtracks, f_value=r.f_value,
                        grad_norm=r.grad_norm, cg_iterations=r.cg_iterations)
            for r in trace]


def _newton_params(options) -> NewtonCgParams:
    return NewtonCgParams(
        eps_g=options.eps_g, eps_H=options.eps_H, theta=options.theta,
        zeta=options.zeta, eta=options.eta, delta=options.delta,
        oracle=options.oracle, line_search=options.line_search,
        seed=options.seed)


def _solve_unconstrained(req: SolveRequest) -> SolveResponse:
    inst = _instance_from_spec(req.instance)
    F = robust_regression(inst)
    report = newton_cg(F, np.ones(inst.n), _newton_params(req.options))
    grad_norm = float(np.linalg.norm(F.gradient(report.x_final)))
    ok = (report.status == SolveStatus.SECOND_ORDER_POINT
          and grad_norm <= req.options.eps_g)
    return SolveResponse(
        problem="unconstrained", status=report.status.value,
        objective=report.f_final, grad_norm=grad_norm,
        iterations=report.iterations, residuals_pass=ok,
        eval_counts=_counts_model(report.eval_counts),
        x_final=report.x_final.tolist() if req.include_x else None,
        trace=_trace_models(report.trace) if req.include_trace else None,
        meo_certificate=report.meo_certificate)


def _solve_constrained(req: SolveRequest) -> SolveResponse:
    inst = _instance_from_spec(req.instance)
    problem = sphere_constrained(inst)
    z = feasible_seed_point(inst.n)
    opts, al_opts = req.options, req.al_options
    inner = NewtonCgParams(
        eps_g=al_opts.eps1, eps_H=al_opts.eps2, theta=opts.theta,
        zeta=opts.zeta, eta=opts.eta, delta=opts.delta, oracle=opts.oracle,
        line_search=opts.line_search, seed=opts.seed)
    params = AlParams(
        eps1=al_opts.eps1, eps2=al_opts.eps2, lambda_max=al_opts.lambda_max,
        rho0=al_opts.rho0, alpha=al_opts.alpha, r=al_opts.r, z_feas=z,
        x0=z.copy(), lambda0=np.zeros(1), inner=inner, delta=opts.delta,
        max_outer=al_opts.max_outer, fosp_only=al_opts.fosp_only)
    report = al_solve(problem, params)
    ok = (report.status == AlStatus.CONVERGED
          and report.residuals.fosp_grad <= al_opts.eps1
          and report.residuals.feasibility <= al_opts.eps1)
    trace = []
    if req.include_trace:
        for inner_report in report.inner_reports:
            trace.extend(_trace_models(inner_report.trace))
    return SolveResponse(
        problem="constrained", status=report.status.value,
        objective=problem.f.value(report.x_final),
        grad_norm=report.residuals.fosp_grad,
        iterations=report.total_inner_iterations, residuals_pass=ok,
        eval_counts=_counts_model(report.eval_counts),
        x_final=report.x_final.tolist() if req.include_x else None,
        trace=trace if req.include_trace else None,
        lambda_tilde=report.lambda_tilde_final.tolist(),
        feasibility=report.residuals.feasibility,
        fosp_grad=report.residuals.fosp_grad,
        sosp_lambda_min=report.residuals.sosp_lambda_min,
        outer_iters=report.outer_iters, rho_trace=report.rho_trace,
        total_inner_iterations=report.total_inner_iterations)


def _row_model(row: BenchRow) -> BenchRowModel:
    return BenchRowModel(
        n=row.n, m=row.m, mu=row.mu, mean_objective=row.mean_objective,
        mean_iterations=row.mean_iterations,
        mean_feasibility=row.mean_feasibility,
        mean_wall_time_s=row.mean_wall_time_s,
        residual_flags=row.residual_flags,
        all_residuals_pass=row.all_residuals_pass)


def _bench_config(req: BenchRequest) -> BenchConfig:
    experiment = UNCONSTRAINED if req.experiment == "unconstrained" else CONSTRAINED
    opts, al_opts = req.options, req.al_options
    return BenchConfig(
        experiment=experiment, grid=[tuple(cell) for cell in req.grid],
        instances_per_cell=req.instances_per_cell, seed=req.seed,
        oracle=opts.oracle, line_search=opts.line_search, eps_g=opts.eps_g,
        eps_H=opts.eps_H, eps1=al_opts.eps1, eps2=al_opts.eps2,
        lambda_max=al_opts.lambda_max, rho0=al_opts.rho0, alpha=al_opts.alpha,
        r=al_opts.r, theta=opts.theta, zeta=opts.zeta, eta=opts.eta,
        delta=opts.delta, problem_family=req.problem_family)


def create_app() -> FastAPI:
    app = FastAPI(title="ncgal solver service", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        try:
            if req.problem == "unconstrained":
                return _solve_unconstrained(req)
            return _solve_constrained(req)
        except (ValueError, RuntimeError) as err:
            raise HTTPException(status_code=422, detail=str(err))

    @app.post("/bench/unconstrained", response_model=BenchResponse)
    def bench_unconstrained(req: BenchRequest) -> BenchResponse:
        if req.experiment != "unconstrained":
            raise HTTPException(status_code=422, detail="experiment must be 'unconstrained'")
        try:
            rows = run_unconstrained_bench(_bench_config(req))
        except (ValueError, RuntimeError) as err:
            raise HTTPException(status_code=422, detail=str(err))
        models = [_row_model(r) for r in rows]
        return BenchResponse(experiment=req.experiment, rows=models,
                             all_residuals_pass=all(m.all_residuals_pass for m in models))

    @app.post("/bench/constrained", response_model=BenchResponse)
    def bench_constrained(req: BenchRequest) -> BenchResponse:
        if req.experiment != "constrained":
            raise HTTPException(status_code=422, detail="experiment must be 'constrained'")
        try:
            rows = run_constrained_bench(_bench_config(req))
        except (ValueError, RuntimeError) as err:
            raise HTTPException(status_code=422, detail=str(err))
        models = [_row_model(r) for r in rows]
        return BenchResponse(experiment=req.experiment, rows=models,
                             all_residuals_pass=all(m.all_residuals_pass for m in models))

    @app.post("/check-derivatives", response_model=DerivativeCheckResponse)
    def check_derivatives(req: DerivativeCheckRequest) -> DerivativeCheckResponse:
        config = BenchConfig(experiment="derivative_check",
                             grid=[tuple(cell) for cell in req.grid],
                             seed=req.seed)
        try:
            result = run_derivative_check(config, threshold=req.threshold,
                                          points=req.points)
        except (ValueError, RuntimeError) as err:
            raise HTTPException(status_code=422, detail=str(err))
        return DerivativeCheckResponse(
            checks=[DerivativeCheckItemModel(
                family=c.family, n=c.n, m=c.m, mu=c.mu, seed=c.seed,
                grad_err=c.grad_err, hvp_err=c.hvp_err, passed=c.passed)
                for c in result.checks],
            threshold=result.threshold, all_pass=result.all_pass)

    return app


app = create_app()
