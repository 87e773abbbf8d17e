"""Request and response models for the solver service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class HealthResponse(BaseModel):
    status: str
    version: str


class SolverOptions(BaseModel):
    """Newton-CG settings shared by both problem families."""

    eps_g: float = 1e-5
    eps_H: float = 10.0 ** -2.5
    theta: float = 0.8
    zeta: float = 0.5
    eta: float = 0.2
    delta: float = 0.01
    oracle: Literal["exact", "randomized"] = "exact"
    line_search: Literal["hybrid", "cubic_always"] = "hybrid"
    seed: int = 0


class AlOptions(BaseModel):
    """Outer-loop settings for the constrained solver."""

    eps1: float = 1e-4
    eps2: float = 1e-2
    lambda_max: float = 100.0
    rho0: float = 10.0
    alpha: float = 0.25
    r: float = 10.0
    max_outer: int = 1000
    fosp_only: bool = False


class InstanceSpec(BaseModel):
    """A problem instance, either generated from a seed or given inline."""

    n: Optional[int] = None
    m: Optional[int] = None
    mu: Optional[float] = None
    seed: Optional[int] = None
    A: Optional[list[list[float]]] = None
    b: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check_one_form(self):
        generated = all(v is not None for v in (self.n, self.m, self.mu, self.seed))
        inline = self.A is not None and self.b is not None and self.mu is not None
        if not generated and not inline:
            raise ValueError("provide either (n, m, mu, seed) or inline (A, b, mu)")
        return self


class TraceRecord(BaseModel):
    t: int
    direction: str
    alpha: float
    backtracks: int
    f_value: float
    grad_norm: float
    cg_iterations: int


class EvalCountsModel(BaseModel):
    values: int
    gradients: int
    hess_vecs: int
    constraint_evals: int
    jacobian_vecs: int


class SolveRequest(BaseModel):
    problem: Literal["unconstrained", "constrained"]
    instance: InstanceSpec
    options: SolverOptions = Field(default_factory=SolverOptions)
    al_options: AlOptions = Field(default_factory=AlOptions)
    include_trace: bool = True
    include_x: bool = True


class SolveResponse(BaseModel):
    problem: str
    status: str
    objective: float
    grad_norm: float
    iterations: int
    residuals_pass: bool
    eval_counts: EvalCountsModel
    x_final: Optional[list[float]] = None
    trace: Optional[list[TraceRecord]] = None
    meo_certificate: Optional[bool] = None
    # constrained-only fields
    lambda_tilde: Optional[list[float]] = None
    feasibility: Optional[float] = None
    fosp_grad: Optional[float] = None
    sosp_lambda_min: Optional[float] = None
    outer_iters: Optional[int] = None
    rho_trace: Optional[list[float]] = None
    total_inner_iterations: Optional[int] = None


class BenchRequest(BaseModel):
    experiment: Literal["unconstrained", "constrained"]
    grid: list[tuple[int, int, float]]
    instances_per_cell: int = 10
    seed: int = 0
    options: SolverOptions = Field(default_factory=SolverOptions)
    al_options: AlOptions = Field(default_factory=AlOptions)
    problem_family: Literal["robust_regression", "linear_sphere"] = "robust_regression"


class BenchRowModel(BaseModel):
    n: int
    m: int
    mu: float
    mean_objective: float
    mean_iterations: float
    mean_feasibility: Optional[float] = None
    mean_wall_time_s: float
    residual_flags: list[bool]
    all_residuals_pass: bool


class BenchResponse(BaseModel):
    experiment: str
    rows: list[BenchRowModel]
    all_residuals_pass: bool


class DerivativeCheckRequest(BaseModel):
    grid: list[tuple[int, int, float]]
    seed: int = 0
    threshold: float = 1e-5
    points: int = 10


class DerivativeCheckItemModel(BaseModel):
    family: str
    n: int
    m: int
    mu: float
    seed: int
    grad_err: float
    hvp_err: float
    passed: bool


class DerivativeCheckResponse(BaseModel):
    checks: list[DerivativeCheckItemModel]
    threshold: float
    all_pass: bool
