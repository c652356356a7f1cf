"""Undirected graphs, the single-factor identifiability predicate, the
size-based graph prior and structure graphs for grouped data.

Vertices are numbered 1..p in every public interface; the adjacency matrix
(``UndirectedGraph.adj``) is 0-indexed.
"""
from collections import deque
from itertools import combinations

import numpy as np
from scipy.special import gammaln

from .errors import (DataFormatError, InvalidOrder, InvalidParameter,
                     NonSymmetricW, NotPositiveDefinite, RhoOutOfRange)
from .numerics import cholesky, spd_inverse

__all__ = [
    "UndirectedGraph",
    "GraphPrior",
    "complement",
    "is_identifiable",
    "log_prior",
    "build_ar_graph",
    "build_car_rate",
    "neighborhood_graph",
    "read_graph",
    "write_graph",
    "all_graphs",
]


class UndirectedGraph:
    """Simple undirected graph on vertices 1..p (immutable)."""

    __slots__ = ("_adj",)

    def __init__(self, adj):
        adj = np.array(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InvalidParameter("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise InvalidParameter("adjacency must be symmetric")
        np.fill_diagonal(adj, False)
        adj.flags.writeable = False
        self._adj = adj

    @classmethod
    def from_edges(cls, p, edges):
        adj = np.zeros((p, p), dtype=bool)
        for v, w in edges:
            if v == w:
                raise InvalidParameter("self-loop at vertex %d" % v)
            if not (1 <= v <= p and 1 <= w <= p):
                raise InvalidParameter("edge (%d, %d) outside 1..%d" % (v, w, p))
            adj[v - 1, w - 1] = adj[w - 1, v - 1] = True
        return cls(adj)

    @classmethod
    def empty(cls, p):
        return cls(np.zeros((p, p), dtype=bool))

    @classmethod
    def complete(cls, p):
        return cls(~np.eye(p, dtype=bool))

    @property
    def p(self):
        return self._adj.shape[0]

    @property
    def adj(self):
        return self._adj

    @property
    def m(self):
        return self.p * (self.p - 1) // 2

    @property
    def edges(self):
        """Sorted list of 1-indexed pairs ``(v, w)`` with ``v < w``."""
        iu, ju = np.nonzero(np.triu(self._adj, 1))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(iu, ju)]

    def size(self):
        return int(np.triu(self._adj, 1).sum())

    def has_edge(self, v, w):
        return bool(self._adj[v - 1, w - 1])

    def neighbors(self, v):
        return [int(w) + 1 for w in np.flatnonzero(self._adj[v - 1])]

    def flip(self, v, w):
        adj = self._adj.copy()
        adj[v - 1, w - 1] = adj[w - 1, v - 1] = not adj[v - 1, w - 1]
        return UndirectedGraph(adj)

    def __eq__(self, other):
        return isinstance(other, UndirectedGraph) and np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash((self.p, self._adj.tobytes()))

    def __repr__(self):
        return "UndirectedGraph(p=%d, edges=%r)" % (self.p, self.edges)


def complement(G):
    adj = ~G.adj
    np.fill_diagonal(adj, False)
    return UndirectedGraph(adj)


def is_identifiable(G):
    """True iff every connected component of the complement of ``G`` contains
    an odd cycle, i.e. is not bipartite.

    Components are two-coloured by breadth-first search; a single-vertex
    component is bipartite and therefore fails.
    """
    cadj = complement(G).adj
    p = G.p
    color = [-1] * p
    for start in range(p):
        if color[start] != -1:
            continue
        color[start] = 0
        queue = deque([start])
        odd = False
        while queue:
            u = queue.popleft()
            for w in np.flatnonzero(cadj[u]):
                if color[w] == -1:
                    color[w] = 1 - color[u]
                    queue.append(w)
                elif color[w] == color[u]:
                    odd = True
        if not odd:
            return False
    return True


class GraphPrior:
    """Size-based prior: uniform on the edge count, then uniform among graphs
    of that size, ``Pr(G) = 1 / ((m + 1) * C(m, size(G)))``.
    """

    kind = "size-based"

    def __init__(self, p):
        if p < 1:
            raise InvalidParameter("p must be positive")
        self.p = int(p)
        self.m = self.p * (self.p - 1) // 2

    def log_prior_by_size(self):
        """Array indexed by edge count; entry s is the log prior of one graph of size s."""
        m = self.m
        s = np.arange(m + 1)
        log_binom = gammaln(m + 1) - gammaln(s + 1) - gammaln(m - s + 1)
        return -np.log(m + 1.0) - log_binom

    def __repr__(self):
        return "GraphPrior(kind=%r, p=%d)" % (self.kind, self.p)


def log_prior(prior, G):
    if G.p != prior.p:
        raise InvalidParameter("graph has p=%d, prior has p=%d" % (G.p, prior.p))
    return float(prior.log_prior_by_size()[G.size()])


def build_ar_graph(L, order):
    """Structure graph of an autoregressive model of the given order on 1..L:
    edges (l - k, l) for every lag k <= order.
    """
    if order not in (1, 2, 3, 4):
        raise InvalidOrder("order must be in 1..4, got %r" % (order,))
    if L < 2:
        raise InvalidParameter("need at least two groups, got L=%r" % (L,))
    edges = [(l - k, l) for k in range(1, order + 1) for l in range(k + 1, L + 1)]
    return UndirectedGraph.from_edges(L, edges)


def _check_proximity(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise NonSymmetricW("proximity matrix must be square")
    if not np.allclose(W, W.T):
        raise NonSymmetricW("proximity matrix must be symmetric")
    if np.any(np.diag(W) != 0):
        raise InvalidParameter("proximity matrix must have a zero diagonal")
    if np.any(W < 0):
        raise InvalidParameter("proximity matrix must be non-negative")
    return W


def build_car_rate(W, rho, delta_mu):
    """G-Wishart rate ``(delta_mu - 2) (E_W - rho W)^{-1}`` of a proper CAR model.

    ``E_W`` is the diagonal matrix of row sums of ``W``.  ``rho`` must lie
    strictly between the reciprocals of the smallest and largest eigenvalues
    of ``W``.
    """
    W = _check_proximity(W)
    if not delta_mu > 2:
        raise InvalidParameter("delta_mu must exceed 2")
    row = W.sum(axis=1)
    if np.any(row <= 0):
        raise InvalidParameter("every area needs at least one neighbour")
    ev = np.linalg.eigvalsh(W)
    lo = 1.0 / ev[0] if ev[0] < 0 else -np.inf
    hi = 1.0 / ev[-1] if ev[-1] > 0 else np.inf
    if not lo < rho < hi:
        raise RhoOutOfRange("rho=%r outside (%g, %g)" % (rho, lo, hi))
    M = np.diag(row) - rho * W
    try:
        cholesky(M)
    except NotPositiveDefinite:
        raise RhoOutOfRange("E_W - rho W is not positive definite for rho=%r" % (rho,)) from None
    return (delta_mu - 2.0) * spd_inverse(M)


def neighborhood_graph(W):
    W = _check_proximity(W)
    return UndirectedGraph(W > 0)


def read_graph(path):
    """Read the text format ``p <int>`` followed by one ``v w`` pair per line."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][0] != "p" or len(lines[0]) != 2:
        raise DataFormatError("%s: first line must be 'p <int>'" % path)
    try:
        p = int(lines[0][1])
        edges = [(int(a), int(b)) for a, b in lines[1:]]
    except ValueError as exc:
        raise DataFormatError("%s: %s" % (path, exc)) from None
    return UndirectedGraph.from_edges(p, edges)


def write_graph(G, path):
    with open(path, "w") as fh:
        fh.write("p %d\n" % G.p)
        for v, w in G.edges:
            fh.write("%d %d\n" % (v, w))


def all_graphs(p):
    """Every graph on p vertices (2**m of them), smallest size first."""
    pairs = list(combinations(range(1, p + 1), 2))
    for k in range(len(pairs) + 1):
        for chosen in combinations(pairs, k):
            yield UndirectedGraph.from_edges(p, chosen)
