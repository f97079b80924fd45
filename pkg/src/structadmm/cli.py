"""Command line client.

Every subcommand builds a service request.  By default the request is
handled in-process; with ``--server URL`` it is posted to a running
service instead.  Results are written as CSV (with a ``# key=value``
metadata line) or JSON below ``--out``.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
from pydantic import BaseModel

from . import __version__
from .costmodel import CONVENTIONS
from .errors import StructAdmmError
from .io import write_csv
from .service import handlers
from .service import schemas as S

log = logging.getLogger("structadmm")

ROUTES = {
    "solve": ("/solve", handlers.solve, S.SolveResponse),
    "tune": ("/tune", handlers.tune, S.TuneResponse),
    "analyze": ("/analyze", handlers.analyze, S.AnalyzeResponse),
    "reference": ("/reference", handlers.reference, S.ReferenceResponse),
    "generate": ("/generate", handlers.generate_problem, S.ProblemModel),
    "bench_cost": ("/bench/cost", handlers.bench_cost, S.CostResponse),
    "bench_growth": ("/bench/growth", handlers.bench_growth, S.GrowthResponse),
    "bench_cascade": ("/bench/cascade", handlers.bench_cascade, S.CascadeResponse),
    "study": ("/study", handlers.study, S.StudyResponse),
}


class RemoteError(click.ClickException):
    pass


class LocalTransport:
    def call(self, route: str, req: BaseModel):
        _, fn, _ = ROUTES[route]
        try:
            return fn(req)
        except (StructAdmmError, ValueError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


class HttpTransport:
    def __init__(self, base_url: str, timeout: float = 3600.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, route: str, req: BaseModel):
        import httpx

        path, _, resp_model = ROUTES[route]
        r = httpx.post(self.base_url + path, json=req.model_dump(mode="json"), timeout=self.timeout)
        if r.status_code != 200:
            try:
                body = r.json()
                msg = f"{body.get('error', r.status_code)}: {body.get('detail', r.text)}"
            except ValueError:
                msg = f"HTTP {r.status_code}: {r.text}"
            raise RemoteError(msg)
        return resp_model.model_validate(r.json())


def _load_problem_model(path) -> S.ProblemModel:
    with open(path) as fh:
        return S.ProblemModel.model_validate(json.load(fh))


def _out(ctx_out) -> Path:
    p = Path(ctx_out)
    p.mkdir(parents=True, exist_ok=True)
    return p


@click.group()
@click.version_option(__version__)
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, server, verbose):
    """Structure-exploiting ADMM toolkit for linear MPC."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    ctx.obj = HttpTransport(server) if server else LocalTransport()


@main.command()
@click.option("--category", default="cascade", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--N", "N", default=5, show_default=True, type=int, help="Prediction horizon.")
@click.option("--x", "x", default=10, show_default=True, type=int, help="States (random categories).")
@click.option("--blocks", default=4, show_default=True, type=int, help="Subsystems (random categories).")
@click.option("--S", "stages", default=20, show_default=True, type=int, help="Cascade stages.")
@click.option("--x-i", default=6, show_default=True, type=int)
@click.option("--u-i", default=1, show_default=True, type=int)
@click.option("--coupling-rank", default=1, show_default=True, type=int)
@click.option("--M", "M", default=5, show_default=True, type=int, help="Chain length (fig4_chain).")
@click.option("--unbounded", is_flag=True, help="Omit box constraints.")
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def gen(t, category, seed, N, x, blocks, stages, x_i, u_i, coupling_rank, M, unbounded, out):
    """Generate a problem file."""
    try:
        req = S.GenerateRequest(category=category, seed=seed, N=N, bounded=not unbounded, x=x,
                                blocks=blocks, S=stages, x_i=x_i, u_i=u_i, coupling_rank=coupling_rank, M=M)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    model = t.call("generate", req)
    path = _out(out) / f"{category}_{seed}.json"
    path.write_text(json.dumps(model.model_dump(mode="json"), indent=1))
    click.echo(str(path))


@main.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--algo", type=click.Choice(["conventional", "structured"]), default="structured", show_default=True)
@click.option("--beta", type=float, default=None, help="Balancing parameter (default 0.5).")
@click.option("--rho", default="unit", show_default=True, help="unit, optimal or scale=<r>.")
@click.option("--threads-model", type=click.Choice(["1", "2MN"]), default="1", show_default=True)
@click.option("--max-iters", default=20000, show_default=True, type=int)
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--reference", "ref_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reference solution JSON enabling the dist column.")
@click.option("--seed", default=0, type=int, help="Recorded in the output metadata.")
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def solve(t, problem, algo, beta, rho, threads_model, max_iters, tol, ref_path, seed, out):
    """Solve a problem file and write solution.json and trace.csv."""
    ref = None
    if ref_path:
        d = json.loads(Path(ref_path).read_text())
        ref = S.TrajectoryModel(x=d["x"], u=d["u"])
    req = S.SolveRequest(problem=_load_problem_model(problem), algo=algo, beta=beta, rho=rho,
                         threads=threads_model, max_iters=max_iters, tol=tol, reference=ref)
    res = t.call("solve", req)
    o = _out(out)
    (o / "solution.json").write_text(json.dumps({"x": res.x, "u": res.u, "iterations": res.iterations,
                                                 "converged": res.converged, "status": res.status}))
    meta = dict(algo=algo, beta=res.beta, rho=rho, rho_values=res.rho, threads=threads_model,
                iterations=res.iterations, converged=res.converged, ops_per_iter=res.ops_per_iter,
                seed=seed, conventions=CONVENTIONS)
    rows = [(r.iter, r.r_zeta, r.r_eps, r.objective, "" if r.dist is None else r.dist, r.cum_ops)
            for r in res.trace]
    write_csv(o / "trace.csv", ["iter", "r_zeta", "r_eps", "objective", "dist", "cum_ops"], rows, meta)
    click.echo(f"{res.status} after {res.iterations} iterations; wrote {o / 'trace.csv'}")


@main.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def tune(t, problem, out):
    """Optimal per-subsystem penalty parameters."""
    res = t.call("tune", S.ProblemRequest(problem=_load_problem_model(problem)))
    rows = [(r.subsystem, r.eig_min, r.eig_max, "" if r.rho_star is None else r.rho_star, int(r.pd), r.rho)
            for r in res.rows]
    path = write_csv(_out(out) / "penalty.csv", ["subsystem", "eig_min", "eig_max", "rho_star", "pd", "rho"],
                     rows, {"problem": Path(problem).name, "fallback_rho": 1.0})
    for r in rows:
        click.echo("\t".join(str(v) for v in r))
    click.echo(f"wrote {path}")


@main.command()
@click.argument("system", type=click.Path(exists=True, dir_okay=False))
@click.option("--gamma", "with_gamma", is_flag=True, help="Also write the link usage matrix.")
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def analyze(t, system, with_gamma, out):
    """Separation tendency of the system (and partition) in a problem file."""
    d = json.loads(Path(system).read_text())
    part = d.get("partition")
    req = S.AnalyzeRequest(A=d["A"], B=d.get("B") or [], include_gamma=with_gamma,
                           partition=None if part is None else S.PartitionModel(**part))
    res = t.call("analyze", req)
    o = _out(out)
    meta = dict(s="" if res.s is None else res.s, exists=res.exists, semiconvergent=res.semiconvergent,
                controllable=res.controllable, converged=res.converged, structured=res.structured)
    rows = [] if res.s_i is None else list(enumerate(res.s_i))
    write_csv(o / "analysis.csv", ["row", "s_i"], rows, meta)
    if with_gamma and res.gamma is not None:
        ncol = len(res.gamma[0]) if res.gamma else 0
        write_csv(o / "gamma.csv", [f"c{j}" for j in range(ncol)], res.gamma, {"rows": len(res.gamma)})
    click.echo(f"s = {res.s}  exists={res.exists} semiconvergent={res.semiconvergent} "
               f"controllable={res.controllable}")


@main.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", default=1e-10, show_default=True, type=float)
@click.option("--max-iters", default=200_000, show_default=True, type=int)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def reference(t, problem, tol, max_iters, out):
    """High-accuracy reference solution (validated by its KKT residual)."""
    res = t.call("reference", S.ReferenceRequest(problem=_load_problem_model(problem), tol=tol,
                                                 max_iters=max_iters))
    path = _out(out) / "reference.json"
    path.write_text(json.dumps(res.model_dump()))
    click.echo(f"kkt residual {res.kkt_residual:.3e}; wrote {path}")


@main.command()
@click.option("--cost", "mode", flag_value="cost", default=True, help="Cascade cost per iteration.")
@click.option("--growth", "mode", flag_value="growth", help="Chain family growth curves.")
@click.option("--cascade", "mode", flag_value="cascade", help="Cascade convergence curves.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--scenarios", default=200, show_default=True, type=int)
@click.option("--M-max", "M_max", default=15, show_default=True, type=int)
@click.option("--N", "N", default=None, type=int, help="Horizon (5 for the cascade, 10 for growth).")
@click.option("--beta", default=0.5, show_default=True, type=float)
@click.option("--rho", default="scale=90", show_default=True, help="Penalty policy for the cascade.")
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def bench(t, mode, seed, scenarios, M_max, N, beta, rho, out):
    """Cost tables and convergence benchmarks."""
    from .runner import RhoPolicy

    pol = RhoPolicy.parse(rho)
    scale = pol.scale if pol.kind == "optimal" else 1.0
    o = _out(out)
    if mode == "growth":
        res = t.call("bench_growth", S.GrowthRequest(M_max=M_max, N=N or 10, seed=seed))
        keys = ["#1", "#2", "#3", "#4", "#5"]
        rows = [(r.M, r.x, r.measured["i"], r.measured["ii"], r.measured["iii"], *[r.table[k] for k in keys])
                for r in res.rows]
        path = write_csv(o / "growth.csv", ["M", "x", "conventional", "structured_1", "structured_2MN",
                                            "order_1", "order_2", "order_3", "order_4", "order_5"], rows,
                         dict(family="fig4_chain", N=N or 10, seed=seed, conventions=CONVENTIONS))
    elif mode == "cost":
        res = t.call("bench_cost", S.CostRequest(seed=seed, N=N or 5, beta=beta, penalty_scale=scale))
        rows = [(r.config, r.algo, r.threads, r.cost, r.ratio) for r in res.rows]
        for r in rows:
            click.echo("\t".join(str(v) for v in r))
        path = write_csv(o / "cost.csv", ["config", "algo", "threads", "cost", "ratio"], rows,
                         dict(system="cascade", S=20, x_i=6, u_i=1, N=N or 5, seed=seed,
                              use_case=res.use_case, conventions=res.conventions))
    else:
        res = t.call("bench_cascade", S.CascadeRequest(seed=seed, N=N or 5, beta=beta, penalty_scale=scale,
                                                       scenarios=scenarios))
        rows = []
        for j, b in enumerate(res.budgets):
            rows.append((b, *[res.median[k][j] for k in ("i", "ii", "iii")],
                         *[res.geomean[k][j] for k in ("i", "ii", "iii")],
                         *[res.p10[k][j] for k in ("i", "ii", "iii")],
                         *[res.p90[k][j] for k in ("i", "ii", "iii")]))
        head = ["sequential_ops"] + [f"{s}_{k}" for s in ("median", "geomean", "p10", "p90")
                                     for k in ("i", "ii", "iii")]
        path = write_csv(o / "convergence.csv", head, rows,
                         dict(system="cascade", scenarios=scenarios, seed=seed, beta=beta, rho=rho,
                              cost_i=res.costs["i"], cost_ii=res.costs["ii"], cost_iii=res.costs["iii"],
                              skipped=len(res.skipped), conventions=CONVENTIONS))
    click.echo(f"wrote {path}")


@main.command()
@click.option("--seeds", default=5, show_default=True, type=int)
@click.option("--initial-conditions", default=5, show_default=True, type=int)
@click.option("--N", "N", default=5, show_default=True, type=int)
@click.option("--dist-target", default=1e-4, show_default=True, type=float)
@click.option("--rho", default="unit", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int, help="Base seed of the system draws.")
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@click.pass_obj
def study(t, seeds, initial_conditions, N, dist_target, rho, seed, out):
    """Iteration increase against separation tendency over random systems."""
    res = t.call("study", S.StudyRequest(seeds=seeds, initial_conditions=initial_conditions, N=N,
                                         dist_target=dist_target, rho=rho, base_seed=seed))
    rows = [(r.category, r.x, r.M, r.seed, r.s, r.iters_conventional, r.iters_structured, r.increase)
            for r in res.rows]
    path = write_csv(_out(out) / "study.csv",
                     ["category", "x", "M", "seed", "s", "iters_conventional", "iters_structured", "increase"],
                     rows, dict(spearman=res.spearman, seeds=seeds, initial_conditions=initial_conditions,
                                N=N, dist_target=dist_target, rho=rho, base_seed=seed,
                                skipped=len(res.skipped)))
    click.echo(f"spearman = {res.spearman:.3f}; wrote {path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("structadmm.service.app:app", host=host, port=port)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
