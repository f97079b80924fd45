import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from structadmm.errors import DimensionMismatch
from structadmm.io import (csv_text, load_problem, metadata_line, problem_from_dict, problem_to_dict, read_csv,
                           save_problem, write_csv)
from structadmm.problem import ConstraintSet, Partition

from conftest import random_problem


def test_minimal_document_defaults():
    prob, part, meta = problem_from_dict({"A": [[0.5]], "B": [[1.0]], "N": 3})
    assert prob.N == 3 and part.M == 1 and meta == {}
    assert prob.Xset.kind == "unbounded"
    assert np.array_equal(prob.Q, [[1.0]])


def test_null_bounds_are_infinite():
    d = {"A": [[0.5, 0], [0, 0.5]], "B": [[1.0], [0.0]], "N": 2,
         "xbounds": {"lower": [None, -1.0], "upper": [None, 1.0]}}
    prob, _, _ = problem_from_dict(d)
    lo, hi = prob.Xset.bounds()
    assert lo[0] == -np.inf and hi[1] == 1.0
    back = problem_to_dict(prob)
    assert back["xbounds"] == {"lower": [None, -1.0], "upper": [None, 1.0]}
    assert back["ubounds"] is None


def test_bad_bounds_length():
    with pytest.raises(DimensionMismatch):
        problem_from_dict({"A": [[0.5]], "B": [[1.0]], "N": 2, "xbounds": {"lower": [0, 0], "upper": [1, 1]}})


def test_bad_partition():
    with pytest.raises(DimensionMismatch):
        problem_from_dict({"A": [[0.5]], "B": [[1.0]], "N": 2, "partition": {"xdims": [2], "udims": [1]}})


def test_custom_sets_not_serializable():
    import dataclasses
    prob = dataclasses.replace(random_problem(0), Xset=ConstraintSet.custom(lambda z: z, 4))
    with pytest.raises(ValueError):
        problem_to_dict(prob)


def test_file_roundtrip(tmp_path):
    prob = random_problem(3)
    part = Partition((2, 2), (1, 1))
    path = tmp_path / "sub" / "p.json"
    save_problem(path, prob, part, {"seed": 3})
    back, bpart, meta = load_problem(path)
    assert bpart == part and meta == {"seed": 3}
    for a in ("Q", "R", "r_x", "r_u", "x1"):
        assert np.array_equal(getattr(back, a), getattr(prob, a))
    assert np.array_equal(back.system.A, prob.system.A)
    assert set(json.loads(path.read_text())) >= {"A", "B", "N", "Q", "R", "r_x", "r_u", "x1", "xbounds",
                                                 "ubounds", "partition"}


def test_metadata_line():
    assert metadata_line({"a": 1, "b": "x y", "c": [1, 2], "d": 0.5}) == "# a=1 b=x_y c=1,2 d=0.5"


def test_csv_roundtrip(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["iter", "v"], [(1, 0.1), (2, 1e-300)], {"algo": "structured"})
    meta, header, rows = read_csv(p)
    assert meta == {"algo": "structured"} and header == ["iter", "v"]
    assert [float(r[1]) for r in rows] == [0.1, 1e-300]
    assert csv_text(["a"], []).startswith("# \na\n")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_floats_exact(vals):
    import io, csv
    text = csv_text(["v"], [(v,) for v in vals])
    rows = list(csv.reader(io.StringIO(text)))[2:]
    assert [float(r[0]) for r in rows] == vals
