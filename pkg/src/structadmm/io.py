"""Problem files (JSON) and CSV output with a ``# key=value`` metadata line."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DimensionMismatch
from .problem import ConstraintSet, LtiSystem, MpcProblem, Partition


def _num(v, default):
    if v is None:
        return default
    if isinstance(v, str):
        return float(v)          # "inf", "-inf"
    return float(v)


def _bounds_from(obj, dim):
    if obj is None:
        return None
    if isinstance(obj, dict):
        lo, hi = obj.get("lower"), obj.get("upper")
    else:
        lo, hi = obj
    lo = [-np.inf] * dim if lo is None else [_num(v, -np.inf) for v in lo]
    hi = [np.inf] * dim if hi is None else [_num(v, np.inf) for v in hi]
    if len(lo) != dim or len(hi) != dim:
        raise DimensionMismatch(f"bounds need {dim} entries")
    lo, hi = np.asarray(lo), np.asarray(hi)
    if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
        return ConstraintSet.unbounded(dim)
    return ConstraintSet.box(lo, hi)


def _bounds_to(cset: ConstraintSet):
    b = cset.bounds()
    if b is None:
        raise ValueError("custom constraint sets cannot be serialized")
    if cset.kind == "unbounded":
        return None
    lo = [None if np.isinf(v) else float(v) for v in b[0]]
    hi = [None if np.isinf(v) else float(v) for v in b[1]]
    return {"lower": lo, "upper": hi}


def problem_from_dict(d: dict):
    """Parse a problem document; returns (MpcProblem, Partition, metadata).

    ``A`` and ``B`` are row-major nested lists.  Bounds are ``null`` (no
    constraint) or ``{"lower": [...], "upper": [...]}`` where ``null``
    entries mean an infinite bound.  A missing partition means ``M = 1``.
    """
    A = np.asarray(d["A"], dtype=float)
    nx = A.shape[0]
    B = np.asarray(d.get("B", []), dtype=float)
    if B.size == 0:
        B = np.zeros((nx, 0))
    B = B.reshape(nx, -1)
    nu = B.shape[1]
    N = int(d["N"])
    system = LtiSystem(A, B)
    Q = np.asarray(d.get("Q", np.eye(nx)), dtype=float).reshape(nx, nx)
    R = np.asarray(d.get("R", np.eye(nu)), dtype=float).reshape(nu, nu)
    r_x = np.asarray(d.get("r_x", np.zeros((N, nx))), dtype=float)
    r_u = np.asarray(d.get("r_u", np.zeros((N, nu))), dtype=float)
    x1 = np.asarray(d.get("x1", np.zeros(nx)), dtype=float)
    prob = MpcProblem(system, N, Q, R, r_x, r_u, x1,
                      _bounds_from(d.get("xbounds"), nx), _bounds_from(d.get("ubounds"), nu))
    p = d.get("partition")
    part = Partition.trivial(nx, nu) if p is None else Partition(p["xdims"], p["udims"])
    part.check(nx, nu)
    return prob, part, dict(d.get("metadata") or {})


def problem_to_dict(problem: MpcProblem, partition: Optional[Partition] = None,
                    metadata: Optional[dict] = None) -> dict:
    partition = partition or Partition.trivial(problem.nx, problem.nu)
    d = {
        "A": problem.system.A.tolist(),
        "B": problem.system.B.tolist(),
        "N": problem.N,
        "Q": problem.Q.tolist(),
        "R": problem.R.tolist(),
        "r_x": problem.r_x.tolist(),
        "r_u": problem.r_u.tolist(),
        "x1": problem.x1.tolist(),
        "xbounds": _bounds_to(problem.Xset),
        "ubounds": _bounds_to(problem.Uset),
        "partition": {"xdims": list(partition.xdims), "udims": list(partition.udims)},
    }
    if metadata:
        d["metadata"] = metadata
    return d


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))


def save_problem(path, problem, partition=None, metadata=None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem, partition, metadata), fh, indent=1)


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v).replace(" ", "_")


def metadata_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items())


def csv_text(header: Iterable[str], rows: Iterable[Iterable], meta: Optional[dict] = None) -> str:
    buf = _io.StringIO()
    buf.write(metadata_line(meta or {}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows, meta=None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    text = csv_text(header, rows, meta)
    with open(path, "w") as fh:
        fh.write(text)
    return Path(path)


def read_csv(path):
    """Return (metadata dict, header, rows as lists of strings)."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        meta = {}
        if first.startswith("#"):
            for tok in first[1:].split():
                k, _, v = tok.partition("=")
                meta[k] = v
        r = list(csv.reader(fh))
    return meta, r[0], r[1:]
