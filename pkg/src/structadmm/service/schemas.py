"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from ..generate import ALL_KINDS, CATEGORIES


class BoundsModel(BaseModel):
    # null entries are infinite bounds
    lower: List[Optional[float]]
    upper: List[Optional[float]]


class PartitionModel(BaseModel):
    xdims: List[int]
    udims: List[int]


class ProblemModel(BaseModel):
    A: List[List[float]]
    B: List[List[float]] = Field(default_factory=list)
    N: int = Field(gt=0)
    Q: Optional[List[List[float]]] = None
    R: Optional[List[List[float]]] = None
    r_x: Optional[List[List[float]]] = None
    r_u: Optional[List[List[float]]] = None
    x1: Optional[List[float]] = None
    xbounds: Optional[BoundsModel] = None
    ubounds: Optional[BoundsModel] = None
    partition: Optional[PartitionModel] = None
    metadata: Dict[str, object] = Field(default_factory=dict)

    def to_dict(self):
        return self.model_dump(exclude_none=True)


class TrajectoryModel(BaseModel):
    x: List[List[float]]
    u: List[List[float]]


class TraceRow(BaseModel):
    iter: int
    r_zeta: float
    r_eps: float
    objective: float
    dist: Optional[float] = None
    cum_ops: int


class SolveRequest(BaseModel):
    problem: ProblemModel
    algo: Literal["conventional", "structured"] = "structured"
    beta: Optional[float] = None
    rho: str = "unit"
    threads: Literal["1", "2MN"] = "1"
    max_iters: int = Field(20000, ge=1)
    tol: float = Field(1e-8, gt=0)
    reference: Optional[TrajectoryModel] = None
    dist_target: Optional[float] = None


class SolveResponse(BaseModel):
    x: List[List[float]]
    u: List[List[float]]
    iterations: int
    converged: bool
    status: str
    rho: List[float]
    beta: float
    ops_per_iter: int
    trace: List[TraceRow]


class ProblemRequest(BaseModel):
    problem: ProblemModel


class PenaltyRow(BaseModel):
    subsystem: int
    eig_min: float
    eig_max: float
    rho_star: Optional[float]
    pd: bool
    rho: float


class TuneResponse(BaseModel):
    rows: List[PenaltyRow]


class AnalyzeRequest(BaseModel):
    A: List[List[float]]
    B: List[List[float]] = Field(default_factory=list)
    partition: Optional[PartitionModel] = None
    include_gamma: bool = False


class AnalyzeResponse(BaseModel):
    s_i: Optional[List[float]]
    s: Optional[float]
    exists: bool
    semiconvergent: bool
    controllable: bool
    converged: bool
    structured: bool
    gamma: Optional[List[List[float]]] = None


class ReferenceRequest(BaseModel):
    problem: ProblemModel
    tol: float = Field(1e-10, gt=0)
    max_iters: int = Field(200_000, ge=1)


class ReferenceResponse(BaseModel):
    x: List[List[float]]
    u: List[List[float]]
    kkt_residual: float
    iterations: int


class GenerateRequest(BaseModel):
    category: str = "cascade"
    seed: int = 0
    N: int = Field(5, gt=0)
    bounded: bool = True
    x: int = Field(10, ge=1)
    blocks: int = Field(4, ge=1)
    S: int = Field(20, ge=2)
    x_i: int = Field(6, ge=1)
    u_i: int = Field(1, ge=0)
    coupling_rank: int = Field(1, ge=0)
    M: int = Field(5, ge=1)

    @field_validator("category")
    @classmethod
    def _known(cls, v):
        if v not in ALL_KINDS:
            raise ValueError(f"category must be one of {', '.join(ALL_KINDS)}")
        return v


class CostRequest(BaseModel):
    S: int = Field(20, ge=2)
    x_i: int = Field(6, ge=1)
    u_i: int = Field(1, ge=0)
    N: int = Field(5, gt=0)
    seed: int = 0
    penalty_scale: float = Field(90.0, gt=0)
    beta: float = Field(0.5, gt=0, lt=1)


class CostRow(BaseModel):
    config: str
    algo: str
    threads: str
    cost: int
    ratio: float


class CostResponse(BaseModel):
    rows: List[CostRow]
    use_case: str
    conventions: str


class GrowthRequest(BaseModel):
    M_max: int = Field(15, ge=1)
    N: int = Field(10, gt=0)
    seed: int = 0


class GrowthRow(BaseModel):
    M: int
    x: int
    measured: Dict[str, int]
    table: Dict[str, int]


class GrowthResponse(BaseModel):
    rows: List[GrowthRow]


class CascadeRequest(CostRequest):
    scenarios: int = Field(200, ge=1)
    max_iters: int = Field(20000, ge=1)
    budget_points: int = Field(80, ge=2)


class CascadeResponse(BaseModel):
    costs: Dict[str, int]
    budgets: List[float]
    median: Dict[str, List[float]]
    geomean: Dict[str, List[float]]
    p10: Dict[str, List[float]]
    p90: Dict[str, List[float]]
    skipped: List[str]


class StudyRequest(BaseModel):
    categories: List[str] = Field(default_factory=lambda: list(CATEGORIES))
    dims: List[List[int]] = Field(default_factory=lambda: [[5, 2], [10, 4]])
    seeds: int = Field(5, ge=1)
    initial_conditions: int = Field(5, ge=1)
    N: int = Field(5, gt=0)
    dist_target: float = Field(1e-4, gt=0, lt=1)
    rho: str = "unit"
    base_seed: int = 0


class StudyRowModel(BaseModel):
    category: str
    x: int
    M: int
    seed: int
    s: float
    iters_conventional: float
    iters_structured: float
    increase: float


class StudyResponse(BaseModel):
    rows: List[StudyRowModel]
    skipped: List[str]
    spearman: Optional[float]


class ErrorResponse(BaseModel):
    error: str
    detail: str
    violations: List[str] = Field(default_factory=list)
