import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlefactor.errors import DataFormatError, EmptyTrace, SchemaMismatch
from singlefactor.io import (read_matrix_csv, read_trace, summary_to_dict, trace_header,
                             write_matrix_csv, write_trace)
from singlefactor.sfgm import Trace


def _random_trace(p, T, seed, cuts=False, chain=0):
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(p, 1)
    adj = np.zeros((T, p, p), dtype=bool)
    adj[:, iu[0], iu[1]] = rng.random((T, len(iu[0]))) < 0.4
    adj |= adj.transpose(0, 2, 1)
    K = rng.standard_normal((T, p, p))
    K = K + K.transpose(0, 2, 1)
    K[~adj & ~np.eye(p, dtype=bool)] = 0.0
    extra = {"cuts": rng.standard_normal((T, p))} if cuts else {}
    return Trace(rng.standard_normal((T, p)), rng.standard_normal((T, p)),
                 rng.gamma(2.0, size=T), adj, K, np.full(T, chain, dtype=np.int64),
                 np.arange(T) * 3 + 7, None, extra)


def _same(a, b):
    assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.lam, b.lam)
    assert np.array_equal(a.Delta, b.Delta) and np.array_equal(a.adj, b.adj)
    assert np.array_equal(a.K, b.K) and np.array_equal(a.iteration, b.iteration)
    assert set(a.extra) == set(b.extra)
    for k in a.extra:
        assert np.array_equal(a.extra[k], b.extra[k])


def test_header_layout():
    assert trace_header(3) == ["iteration", "alpha_1", "alpha_2", "alpha_3", "lambda_1",
                               "lambda_2", "lambda_3", "Delta", "e_1_2", "e_1_3", "e_2_3"]
    assert trace_header(2, cuts=True)[-2:] == ["cut_1", "cut_2"]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(0, 10**6), st.booleans())
def test_trace_roundtrip_is_exact(tmp_path_factory, p, T, seed, cuts):
    d = tmp_path_factory.mktemp("rt")
    tr = _random_trace(p, T, seed, cuts)
    write_trace(tr, d / "c.csv", d / "c_K.csv")
    _same(tr, read_trace(d / "c.csv", d / "c_K.csv"))


def test_schema_mismatch(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("iteration,alpha_1,lambda_1,Delta,extra\n0,1,2,3,4\n")
    with pytest.raises(SchemaMismatch):
        read_trace(path)
    write_trace(_random_trace(2, 3, 0), path, tmp_path / "k.csv")
    (tmp_path / "k.csv").write_text("it,v,w,x\n")
    with pytest.raises(SchemaMismatch):
        read_trace(path, tmp_path / "k.csv")


def test_constant_trace_has_zero_width_intervals():
    tr = _random_trace(3, 1, 1)
    tr = Trace.concatenate([tr] * 40)
    s = summary_to_dict(tr)
    for key in ("alpha", "lambda"):
        assert s[key]["lower"] == s[key]["upper"]
        assert np.allclose(s[key]["mean"], s[key]["lower"], rtol=1e-14)
    assert s["Delta"]["lower"] == s["Delta"]["upper"]
    assert s["n_draws"] == 40


def test_disjoint_chains_concatenate():
    a, b = _random_trace(3, 5, 1, chain=0), _random_trace(3, 8, 2, chain=1)
    tr = Trace.concatenate([a, b])
    assert len(tr) == 13
    assert summary_to_dict(tr)["n_draws"] == 13
    assert np.array_equal(np.bincount(tr.chain), [5, 8])


def test_empty_trace_summary():
    with pytest.raises(EmptyTrace):
        summary_to_dict(_random_trace(2, 3, 0).select(np.zeros(3, dtype=bool)))


def test_summary_names():
    s = summary_to_dict(_random_trace(2, 10, 4), names=["x", "y"])
    assert s["variables"] == ["x", "y"]
    assert {b["variable"] for b in s["bayes_factors"]} <= {"x", "y"}


def test_matrix_csv(tmp_path):
    A = np.array([[1.0, np.nan], [0.25, -3.0]])
    path = tmp_path / "m.csv"
    write_matrix_csv(A, path, header=["a", "b"])
    assert np.array_equal(read_matrix_csv(path), A, equal_nan=True)
    path.write_text("1,2\n3\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(path)
    path.write_text("1,x\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(path)
    path.write_text("")
    with pytest.raises(DataFormatError):
        read_matrix_csv(path)
