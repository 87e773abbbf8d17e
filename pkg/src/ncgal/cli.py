"""Thin command-line client for the solver service.

Every subcommand builds a request model, sends it to the service over HTTP,
and formats the response. By default the service app is mounted in-process
(no network, same wire format); pass ``--server URL`` to target a running
instance instead. Exit codes follow the residual checks: 0 only when every
run's recomputed residuals passed.
"""

from __future__ import annotations

import asyncio
import sys

import click
import httpx

from .bench import BenchRow, emit_report, load_config


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        from .service.app import create_app

        async def call() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://ncgal.internal",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(call())
    if resp.status_code != 200:
        raise click.ClickException(f"service error {resp.status_code}: {resp.text}")
    return resp.json()


def _parse_grid(text: str) -> list[tuple[int, int, float]]:
    """Parse 'n,m,mu;n,m,mu' into grid cells."""
    cells = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise click.BadParameter(f"grid cell {chunk!r} is not 'n,m,mu'")
        cells.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return cells


def _rows_from_response(rows: list[dict]) -> list[BenchRow]:
    return [BenchRow(n=r["n"], m=r["m"], mu=r["mu"],
                     mean_objective=r["mean_objective"],
                     mean_iterations=r["mean_iterations"],
                     mean_feasibility=r["mean_feasibility"],
                     mean_wall_time_s=r["mean_wall_time_s"],
                     residual_flags=r["residual_flags"]) for r in rows]


def _bench_payload(config_path, grid, instances, seed, oracle, line_search,
                   experiment) -> dict:
    options: dict = {}
    al_options: dict = {}
    payload: dict = {"experiment": experiment}
    if config_path:
        config = load_config(config_path)
        payload["grid"] = config.grid
        payload["instances_per_cell"] = config.instances_per_cell
        payload["seed"] = config.seed
        payload["problem_family"] = config.problem_family
        options = {"eps_g": config.eps_g, "eps_H": config.eps_H,
                   "theta": config.theta, "zeta": config.zeta,
                   "eta": config.eta, "delta": config.delta,
                   "oracle": config.oracle, "line_search": config.line_search,
                   "seed": config.seed}
        al_options = {"eps1": config.eps1, "eps2": config.eps2,
                      "lambda_max": config.lambda_max, "rho0": config.rho0,
                      "alpha": config.alpha, "r": config.r}
    if grid:
        payload["grid"] = _parse_grid(grid)
    if instances is not None:
        payload["instances_per_cell"] = instances
    if seed is not None:
        payload["seed"] = seed
        options["seed"] = seed
    if oracle:
        options["oracle"] = oracle
    if line_search:
        options["line_search"] = line_search
    if options:
        payload["options"] = options
    if al_options:
        payload["al_options"] = al_options
    payload.setdefault("grid", [])
    return payload


def _run_bench(server, config_path, grid, instances, seed, oracle,
               line_search, out, fmt, experiment) -> None:
    payload = _bench_payload(config_path, grid, instances, seed, oracle,
                             line_search, experiment)
    endpoint = f"/bench/{experiment}"
    data = _post(server, endpoint, payload)
    rows = _rows_from_response(data["rows"])
    if out:
        emit_report(rows, fmt, out)
        click.echo(f"wrote {len(rows)} row(s) to {out}")
    else:
        from .bench import render_csv, render_markdown
        click.echo((render_csv if fmt == "csv" else render_markdown)(rows), nl=False)
    if not data["all_residuals_pass"]:
        click.echo("residual verification FAILED for at least one run", err=True)
        sys.exit(1)


_shared_bench_options = [
    click.option("--server", default=None, help="Base URL of a running service; default runs in-process."),
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="JSON config file; flags below override its fields."),
    click.option("--grid", default=None, help="Cells as 'n,m,mu;n,m,mu'."),
    click.option("--instances", type=int, default=None, help="Instances per cell."),
    click.option("--seed", type=int, default=None, help="Base seed."),
    click.option("--oracle", type=click.Choice(["exact", "randomized"]), default=None),
    click.option("--line-search", type=click.Choice(["hybrid", "cubic_always"]), default=None),
    click.option("--out", type=click.Path(), default=None, help="Report path (stdout if omitted)."),
    click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="csv"),
]


def _with_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def main():
    """Benchmark and solve harness for the Newton-CG / AL solver service."""


@main.command("bench-unconstrained")
@_with_options(_shared_bench_options)
def bench_unconstrained(server, config_path, grid, instances, seed, oracle,
                        line_search, out, fmt):
    """Run the unconstrained regression benchmark grid."""
    _run_bench(server, config_path, grid, instances, seed, oracle,
               line_search, out, fmt, "unconstrained")


@main.command("bench-constrained")
@_with_options(_shared_bench_options)
def bench_constrained(server, config_path, grid, instances, seed, oracle,
                      line_search, out, fmt):
    """Run the sphere-constrained regression benchmark grid."""
    _run_bench(server, config_path, grid, instances, seed, oracle,
               line_search, out, fmt, "constrained")


@main.command("check-derivatives")
@click.option("--server", default=None)
@click.option("--grid", default="10,5,1", help="Cells as 'n,m,mu;...'.")
@click.option("--seed", type=int, default=0)
@click.option("--threshold", type=float, default=1e-5)
def check_derivatives(server, grid, seed, threshold):
    """Finite-difference gate for every problem builder's derivatives."""
    payload = {"grid": _parse_grid(grid), "seed": seed, "threshold": threshold}
    data = _post(server, "/check-derivatives", payload)
    for item in data["checks"]:
        status = "ok" if item["passed"] else "FAIL"
        click.echo(f"[{status}] {item['family']} n={item['n']} m={item['m']} "
                   f"mu={item['mu']} grad_err={item['grad_err']:.3e} "
                   f"hvp_err={item['hvp_err']:.3e}")
    if not data["all_pass"]:
        sys.exit(1)
    click.echo(f"all derivative checks passed at threshold {data['threshold']:g}")


@main.command("solve")
@click.option("--server", default=None)
@click.option("--problem", type=click.Choice(["unconstrained", "constrained"]),
              default="unconstrained")
@click.option("--n", type=int, default=None)
@click.option("--m", type=int, default=None)
@click.option("--mu", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--instance-file", type=click.Path(exists=True), default=None,
              help="Load the instance from the text format instead of generating it.")
@click.option("--eps-g", type=float, default=1e-5)
@click.option("--eps-h", type=float, default=10.0 ** -2.5)
@click.option("--eps1", type=float, default=1e-4)
@click.option("--eps2", type=float, default=1e-2)
@click.option("--oracle", type=click.Choice(["exact", "randomized"]), default="exact")
def solve(server, problem, n, m, mu, seed, instance_file, eps_g, eps_h,
          eps1, eps2, oracle):
    """Solve a single instance and print its iteration trace."""
    if instance_file:
        from .problems import load_instance
        inst = load_instance(instance_file)
        instance = {"A": inst.A.tolist(), "b": inst.b.tolist(), "mu": inst.mu,
                    "seed": inst.seed}
    else:
        if n is None or m is None or mu is None:
            raise click.UsageError("provide --n, --m and --mu (or --instance-file)")
        instance = {"n": n, "m": m, "mu": mu, "seed": seed}
    payload = {
        "problem": problem,
        "instance": instance,
        "options": {"eps_g": eps_g, "eps_H": eps_h, "oracle": oracle, "seed": seed},
        "al_options": {"eps1": eps1, "eps2": eps2},
        "include_x": False,
    }
    data = _post(server, "/solve", payload)
    for rec in data["trace"] or []:
        click.echo(f"t={rec['t']:4d} dir={rec['direction']:<6s} "
                   f"alpha={rec['alpha']:.6f} j={rec['backtracks']:3d} "
                   f"F={rec['f_value']:.10e} |g|={rec['grad_norm']:.3e} "
                   f"cg={rec['cg_iterations']}")
    click.echo(f"status={data['status']} objective={data['objective']:.10e} "
               f"iterations={data['iterations']}")
    if problem == "constrained":
        click.echo(f"fosp_grad={data['fosp_grad']:.3e} "
                   f"feasibility={data['feasibility']:.3e} "
                   f"lambda_tilde={data['lambda_tilde']}")
    else:
        click.echo(f"grad_norm={data['grad_norm']:.3e}")
    if not data["residuals_pass"]:
        click.echo("residual verification FAILED", err=True)
        sys.exit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
def serve(host, port):
    """Run the solver service with uvicorn."""
    import uvicorn

    uvicorn.run("ncgal.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
