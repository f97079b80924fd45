"""Transport-independent request handlers.

The HTTP app and the command line's in-process transport both call these.
"""

from __future__ import annotations

import math

import numpy as np

from .. import bench
from ..generate import GenSpec, generate, split_dims, wrap_mpc
from ..io import problem_from_dict, problem_to_dict
from ..oracle import reference_solve
from ..penalty import tune_penalties
from ..problem import LtiSystem, Partition, build_stacked
from ..runner import RhoPolicy, solve_problem
from ..structure import analyze as analyze_system
from . import schemas as S


def _finite(v):
    v = float(v)
    return None if math.isnan(v) else v


def _problem(model: S.ProblemModel):
    return problem_from_dict(model.to_dict())


def solve(req: S.SolveRequest) -> S.SolveResponse:
    prob, part, _ = _problem(req.problem)
    ref = None if req.reference is None else (np.asarray(req.reference.x), np.asarray(req.reference.u))
    res = solve_problem(prob, part, algo=req.algo, beta=req.beta, rho=RhoPolicy.parse(req.rho),
                        threads=req.threads, max_iters=req.max_iters, tol=req.tol, reference=ref,
                        dist_target=req.dist_target)
    sol = res.solution
    trace = [S.TraceRow(iter=t.iter, r_zeta=t.r_zeta, r_eps=t.r_eps, objective=t.objective,
                        dist=_finite(t.dist), cum_ops=t.cum_ops) for t in sol.trace]
    return S.SolveResponse(x=sol.x.tolist(), u=sol.u.tolist(), iterations=sol.iterations,
                           converged=sol.converged, status=sol.status, rho=res.rho.tolist(),
                           beta=res.beta, ops_per_iter=res.ops_per_iter, trace=trace)


def tune(req: S.ProblemRequest) -> S.TuneResponse:
    prob, part, _ = _problem(req.problem)
    rep = tune_penalties(build_stacked(prob, part))
    rows = [S.PenaltyRow(subsystem=i, eig_min=a, eig_max=b, rho_star=_finite(r), pd=p, rho=q)
            for i, a, b, r, p, q in rep.rows()]
    return S.TuneResponse(rows=rows)


def analyze(req: S.AnalyzeRequest) -> S.AnalyzeResponse:
    A = np.asarray(req.A, dtype=float)
    B = np.asarray(req.B, dtype=float) if req.B else np.zeros((A.shape[0], 0))
    system = LtiSystem(A, B.reshape(A.shape[0], -1))
    part = (Partition.trivial(system.nx, system.nu) if req.partition is None
            else Partition(req.partition.xdims, req.partition.udims))
    gam, rep = analyze_system(system, part)
    return S.AnalyzeResponse(
        s_i=None if rep.s_i is None else rep.s_i.tolist(), s=rep.s, exists=rep.exists,
        semiconvergent=rep.semiconvergent, controllable=rep.controllable, converged=rep.converged,
        structured=rep.structured, gamma=gam.Gamma.tolist() if req.include_gamma else None)


def reference(req: S.ReferenceRequest) -> S.ReferenceResponse:
    prob, _, _ = _problem(req.problem)
    ref = reference_solve(prob, tol=req.tol, max_iters=req.max_iters)
    return S.ReferenceResponse(x=ref.x.tolist(), u=ref.u.tolist(), kkt_residual=ref.kkt_residual,
                               iterations=ref.iterations)


def generate_problem(req: S.GenerateRequest) -> S.ProblemModel:
    cat = req.category
    if cat == "cascade":
        spec = GenSpec(cat, (req.x_i,) * req.S, (req.u_i,) * req.S, req.seed,
                       coupling_rank=req.coupling_rank)
    elif cat == "fig4_chain":
        spec = GenSpec(cat, (2,) * req.M, (1,) * req.M, req.seed)
    elif cat == "example_unstructured":
        spec = GenSpec(cat, (1, 1), (1, 0), req.seed)
    else:
        spec = GenSpec(cat, split_dims(req.x, req.blocks), (1,) * req.blocks, req.seed)
    system, part = generate(spec)
    prob = wrap_mpc(system, req.N, seed=req.seed, bounded=req.bounded)
    meta = {"generator": spec.to_dict(), "N": req.N, "bounded": req.bounded,
            "recipe": "normal entries, A <- 0.95 A / rho(A) if rho(A) >= 1, Q = I, R = 0.1 I"}
    return S.ProblemModel(**problem_to_dict(prob, part, meta))


def _cascade_cfg(req):
    return bench.CascadeConfig(S=req.S, x_i=req.x_i, u_i=req.u_i, N=req.N, system_seed=req.seed,
                               penalty_scale=req.penalty_scale, beta=req.beta)


def bench_cost(req: S.CostRequest) -> S.CostResponse:
    setup = bench.cascade_setup(_cascade_cfg(req))
    rep = setup.report
    rows = [S.CostRow(config=k, algo=a, threads=t, cost=c, ratio=r) for k, a, t, c, r in rep.rows()]
    return S.CostResponse(rows=rows, use_case=rep.use_case, conventions=rep.conventions)


def bench_growth(req: S.GrowthRequest) -> S.GrowthResponse:
    rows = bench.growth_curves(range(1, req.M_max + 1), req.N, req.seed)
    return S.GrowthResponse(rows=[S.GrowthRow(M=r.M, x=r.x, measured=r.measured, table=r.table)
                                  for r in rows])


def bench_cascade(req: S.CascadeRequest) -> S.CascadeResponse:
    cfg = _cascade_cfg(req)
    cfg.scenarios = req.scenarios
    cfg.max_iters = req.max_iters
    cfg.budget_points = req.budget_points
    res = bench.cascade_convergence(cfg)
    c = res.curves
    conv = lambda d: {k: v.tolist() for k, v in d.items()}
    return S.CascadeResponse(costs=res.setup.report.costs, budgets=c.budgets.tolist(),
                             median=conv(c.median), geomean=conv(c.geomean), p10=conv(c.p10),
                             p90=conv(c.p90), skipped=[f"{s}: {m}" for s, m in res.skipped])


def study(req: S.StudyRequest) -> S.StudyResponse:
    cfg = bench.StudyConfig(categories=tuple(req.categories), dims=tuple(tuple(d) for d in req.dims),
                            seeds=req.seeds, initial_conditions=req.initial_conditions, N=req.N,
                            dist_target=req.dist_target, rho=req.rho, base_seed=req.base_seed)
    res = bench.run_study(cfg)
    rows = [S.StudyRowModel(**vars(r)) for r in res.rows]
    return S.StudyResponse(rows=rows, skipped=[" ".join(map(str, s)) for s in res.skipped],
                           spearman=_finite(res.spearman))
