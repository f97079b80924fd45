"""FastAPI application exposing the solvers, analysis and benchmarks."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import NotAdmissible, StructAdmmError
from . import handlers
from . import schemas as S

log = logging.getLogger(__name__)

app = FastAPI(title="structadmm", version=__version__)


def error_payload(exc: Exception) -> dict:
    return S.ErrorResponse(error=type(exc).__name__, detail=str(exc),
                           violations=getattr(exc, "violations", []) if isinstance(exc, NotAdmissible) else []
                           ).model_dump()


@app.exception_handler(StructAdmmError)
async def _domain_error(request: Request, exc: StructAdmmError):
    return JSONResponse(status_code=422, content=error_payload(exc))


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=422, content=error_payload(exc))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/solve", response_model=S.SolveResponse)
def solve(req: S.SolveRequest):
    return handlers.solve(req)


@app.post("/tune", response_model=S.TuneResponse)
def tune(req: S.ProblemRequest):
    return handlers.tune(req)


@app.post("/analyze", response_model=S.AnalyzeResponse)
def analyze(req: S.AnalyzeRequest):
    return handlers.analyze(req)


@app.post("/reference", response_model=S.ReferenceResponse)
def reference(req: S.ReferenceRequest):
    return handlers.reference(req)


@app.post("/generate", response_model=S.ProblemModel)
def generate(req: S.GenerateRequest):
    return handlers.generate_problem(req)


@app.post("/bench/cost", response_model=S.CostResponse)
def bench_cost(req: S.CostRequest):
    return handlers.bench_cost(req)


@app.post("/bench/growth", response_model=S.GrowthResponse)
def bench_growth(req: S.GrowthRequest):
    return handlers.bench_growth(req)


@app.post("/bench/cascade", response_model=S.CascadeResponse)
def bench_cascade(req: S.CascadeRequest):
    return handlers.bench_cascade(req)


@app.post("/study", response_model=S.StudyResponse)
def study(req: S.StudyRequest):
    return handlers.study(req)
