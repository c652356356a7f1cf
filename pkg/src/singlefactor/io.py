"""Plain-text trace and summary formats.

One CSV per chain with columns ``iteration, alpha_1..p, lambda_1..p, Delta,
e_v_w`` (edge indicators, v < w) and, for copula fits of binary data,
``cut_1..p``.  Entries of K are written sparsely to a sidecar CSV with rows
``iteration, v, w, value`` for the diagonal and the edges of the current
graph.
"""
import csv
import json

import numpy as np

from .errors import DataFormatError, EmptyTrace, SchemaMismatch
from .sfgm import Trace, posterior_summaries

__all__ = [
    "trace_header",
    "write_trace",
    "read_trace",
    "summary_to_dict",
    "write_json",
    "read_matrix_csv",
    "write_matrix_csv",
]


def trace_header(p, cuts=False):
    cols = ["iteration"]
    cols += ["alpha_%d" % v for v in range(1, p + 1)]
    cols += ["lambda_%d" % v for v in range(1, p + 1)]
    cols.append("Delta")
    cols += ["e_%d_%d" % (v, w) for v in range(1, p + 1) for w in range(v + 1, p + 1)]
    if cuts:
        cols += ["cut_%d" % v for v in range(1, p + 1)]
    return cols


def _fmt(x):
    return repr(float(x))


def write_trace(trace, path, k_path=None):
    """Write one chain's draws; ``k_path`` additionally gets the K sidecar."""
    p = trace.p
    cuts = "cuts" in trace.extra
    edges = trace.edge_indicators()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(p, cuts))
        for t in range(len(trace)):
            row = [int(trace.iteration[t])]
            row += [_fmt(x) for x in trace.alpha[t]]
            row += [_fmt(x) for x in trace.lam[t]]
            row.append(_fmt(trace.Delta[t]))
            row += [int(e) for e in edges[t]]
            if cuts:
                row += [_fmt(x) for x in trace.extra["cuts"][t]]
            w.writerow(row)
    if k_path is not None:
        with open(k_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "v", "w", "value"])
            for t in range(len(trace)):
                K = trace.K[t]
                adj = trace.adj[t]
                for v in range(p):
                    for u in range(v, p):
                        if u == v or adj[v, u]:
                            w.writerow([int(trace.iteration[t]), v + 1, u + 1, _fmt(K[v, u])])


def read_trace(path, k_path=None, chain=0):
    """Read a chain CSV (and optional K sidecar) back into a Trace."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("%s is empty" % path)
    header = rows[0]
    p = sum(1 for c in header if c.startswith("alpha_"))
    cuts = any(c.startswith("cut_") for c in header)
    if header != trace_header(p, cuts):
        raise SchemaMismatch("%s: unexpected columns" % path)
    data = np.array(rows[1:], dtype=float).reshape(-1, len(header))
    T = data.shape[0]
    it = data[:, 0].astype(np.int64)
    alpha = data[:, 1:1 + p]
    lam = data[:, 1 + p:1 + 2 * p]
    Delta = data[:, 1 + 2 * p]
    m = p * (p - 1) // 2
    e = data[:, 2 + 2 * p:2 + 2 * p + m].astype(bool)
    iu = np.triu_indices(p, 1)
    adj = np.zeros((T, p, p), dtype=bool)
    adj[:, iu[0], iu[1]] = e
    adj |= adj.transpose(0, 2, 1)
    K = np.zeros((T, p, p))
    if k_path is not None:
        pos = {int(i): t for t, i in enumerate(it)}
        with open(k_path, newline="") as fh:
            reader = csv.reader(fh)
            if next(reader, None) != ["iteration", "v", "w", "value"]:
                raise SchemaMismatch("%s: unexpected columns" % k_path)
            for i, v, w, val in reader:
                t = pos[int(i)]
                K[t, int(v) - 1, int(w) - 1] = K[t, int(w) - 1, int(v) - 1] = float(val)
    extra = {"cuts": data[:, 2 + 2 * p + m:]} if cuts else {}
    return Trace(alpha, lam, Delta, adj, K, np.full(T, chain, dtype=np.int64), it,
                 None, extra)


def _tolist(x):
    return np.asarray(x).tolist()


def summary_to_dict(trace, epsilon=0.01, names=None):
    """JSON-ready posterior summary of a (merged) trace."""
    if len(trace) == 0:
        raise EmptyTrace("trace has no draws")
    s = posterior_summaries(trace, epsilon)
    p = trace.p
    names = list(names) if names else [str(v) for v in range(1, p + 1)]
    out = {
        "n_draws": int(s["n_draws"]),
        "variables": names,
        "pip": _tolist(s["pip"]),
        "median_graph": [list(e) for e in s["median_graph"].edges],
        "expected_edges": {str(c): _tolist(v) for c, v in s["expected_edges"].items()},
        "bayes_factors": [
            {"variable": names[b.variable - 1], "B10": b.value, "evidence": b.label,
             "abs_mean": b.abs_mean, "abs_ci": [b.abs_lower, b.abs_upper]}
            for b in s["bayes_factors"]],
        "epsilon": epsilon,
    }
    for key in ("alpha", "lambda", "Delta", "K"):
        out[key] = {k: _tolist(v) for k, v in s[key].items()}
    return out


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_matrix_csv(path):
    """Dense numeric CSV; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError("%s is empty" % path)
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        A = np.array([[float(c) if c.strip() not in ("", "NA", "nan") else np.nan
                       for c in r] for r in rows])
    except ValueError as exc:
        raise DataFormatError("%s: %s" % (path, exc)) from None
    if A.ndim != 2:
        raise DataFormatError("%s: ragged rows" % path)
    return A


def write_matrix_csv(A, path, header=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in np.atleast_2d(A):
            w.writerow([_fmt(x) for x in row])
