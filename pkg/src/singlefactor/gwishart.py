"""G-Wishart distribution: density, samplers and, for decomposable graphs,
the exact normalising constant.

The density on the cone M+(G) is taken with respect to Lebesgue measure on
the free entries (diagonal and edges)::

    p(K | G, delta, D) = det(K)^{(delta-2)/2} exp(-tr(K D)/2) / I_G(delta, D)
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import multigammaln

from . import _kernels
from .errors import (DimensionMismatch, InvalidDegreesOfFreedom, NoConvergence,
                     NotDecomposable, NotInCone, NotPositiveDefinite)
from .graphs import UndirectedGraph
from .numerics import (bartlett_variates, cholesky, spd_logdet,
                       wishart_scale_root)

__all__ = [
    "GWishartParams",
    "log_unnormalized_density",
    "sample_gwishart_direct",
    "sample_gwishart_exact",
    "gwishart_gibbs_sweep",
    "log_norm_const_complete",
    "log_norm_const_decomposable",
    "perfect_elimination_order",
    "is_decomposable",
    "in_cone",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 1000
CONE_TOL = 1e-8
DEFAULT_MAX_ATTEMPTS = 100000


@dataclass(frozen=True)
class GWishartParams:
    delta: float
    D: np.ndarray
    G: UndirectedGraph

    def __post_init__(self):
        if not self.delta > 2:
            raise InvalidDegreesOfFreedom("delta must exceed 2, got %r" % (self.delta,))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.shape != (self.G.p, self.G.p):
            raise DimensionMismatch("D is %s but G has p=%d" % (D.shape, self.G.p))
        object.__setattr__(self, "D", D)

    @property
    def p(self):
        return self.G.p


def in_cone(K, G, tol=CONE_TOL):
    """K is SPD and its entries off the edge set of G vanish (to ``tol``)."""
    K = np.asarray(K, dtype=float)
    off = ~G.adj & ~np.eye(G.p, dtype=bool)
    if np.any(np.abs(K[off]) > tol):
        return False
    try:
        cholesky(K)
    except NotPositiveDefinite:
        return False
    return True


def log_unnormalized_density(K, params):
    """``(delta-2)/2 * logdet K - tr(K D)/2`` for K in M+(G)."""
    K = np.asarray(K, dtype=float)
    off = ~params.G.adj & ~np.eye(params.p, dtype=bool)
    if np.any(np.abs(K[off]) > CONE_TOL):
        raise NotInCone("K has non-zero entries outside the edge set of G")
    return 0.5 * (params.delta - 2.0) * spd_logdet(K) - 0.5 * np.sum(K * params.D)


def sample_gwishart_direct(params, rng, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Completion draw on M+(G).

    An unconstrained Wishart precision is drawn, inverted, and its inverse is
    iteratively completed so that the inverse of the completion has zeros on
    the non-edges of G while matching the drawn covariance on the edges and
    the diagonal.

    The result is exact for the complete graph and, for any G, has the
    correct marginal law on each complete subset; the joint law is not
    G-Wishart in general (for the empty graph the diagonal entries come out
    correlated).  Use ``sample_gwishart_exact`` where exactness matters.

    Raises
    ------
    NoConvergence
        If the completion has not converged after ``max_sweeps`` sweeps.
    """
    root = wishart_scale_root(params.D)
    chi, z = bartlett_variates(params.delta, params.p, rng)
    K, status = _kernels.gwishart_direct(root, chi, z, np.ascontiguousarray(params.G.adj),
                                         float(tol), int(max_sweeps))
    if status != _kernels.STATUS_OK:
        raise NoConvergence("direct sampler did not converge in %d sweeps" % max_sweeps)
    return K


def _seed(rng):
    return int(rng.integers(0, 2**31 - 1))


def sample_gwishart_exact(params, rng, max_attempts=DEFAULT_MAX_ATTEMPTS):
    """Independent exact draw from G-Wishart(delta, D) by accept-reject.

    The upper Cholesky factor of K is proposed with its free coordinates
    drawn independently from their Wishart-like laws; the coordinates fixed
    by the zero pattern enter the acceptance probability only.  Acceptance
    is high for prior-like rates and degrades as ``delta`` grows, so for
    posterior rates use ``gwishart_gibbs_sweep``.

    Raises
    ------
    NoConvergence
        If no proposal is accepted within ``max_attempts``.
    """
    K, status = _kernels.gwishart_exact(params.D, np.ascontiguousarray(params.G.adj),
                                        float(params.delta), int(max_attempts), _seed(rng))
    if status != _kernels.STATUS_OK:
        raise NoConvergence("no proposal accepted in %d attempts" % max_attempts)
    return K


def gwishart_gibbs_sweep(K, params, rng, sweeps=1):
    """Column-wise Gibbs sweeps that leave G-Wishart(delta, D) invariant.

    For column j with neighbours N, ``k_jj - k_N' A k_N`` (A the N block of
    the inverse of K without row and column j) is drawn as
    ``chi2(delta) / D_jj`` and ``k_N`` from
    ``N(-(D_jj A)^{-1} D_Nj, (D_jj A)^{-1})``.  ``K`` must lie in M+(G).
    """
    K = np.ascontiguousarray(K, dtype=float)
    adj = np.ascontiguousarray(params.G.adj)
    for _ in range(sweeps):
        K = _kernels.gwishart_gibbs_sweep(K, adj, params.D, float(params.delta), _seed(rng))
    return K


def log_norm_const_complete(delta, D):
    """log I(delta, D) for the complete graph on ``D.shape[0]`` vertices.

    With ``nu = delta + p - 1``:
    ``nu p / 2 log 2 - nu / 2 logdet D + log Gamma_p(nu / 2)``.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p = D.shape[0]
    if p == 0:
        return 0.0
    nu = delta + p - 1.0
    return 0.5 * nu * p * np.log(2.0) - 0.5 * nu * spd_logdet(D) + multigammaln(0.5 * nu, p)


def perfect_elimination_order(G):
    """Maximum cardinality search order, or ``None`` if G is not chordal.

    In the returned order every vertex's earlier neighbours form a clique.
    Vertices are 0-indexed.
    """
    p = G.p
    adj = G.adj
    weight = np.zeros(p, dtype=int)
    done = np.zeros(p, dtype=bool)
    order = []
    for _ in range(p):
        cand = np.where(done, -1, weight)
        v = int(np.argmax(cand))
        order.append(v)
        done[v] = True
        weight[adj[v] & ~done] += 1
    seen = set()
    for v in order:
        earlier = [w for w in np.flatnonzero(adj[v]) if w in seen]
        for a in range(len(earlier)):
            for b in range(a + 1, len(earlier)):
                if not adj[earlier[a], earlier[b]]:
                    return None
        seen.add(v)
    return order


def is_decomposable(G):
    return perfect_elimination_order(G) is not None


def log_norm_const_decomposable(params):
    """Exact log I_G(delta, D) for decomposable G.

    Peeling vertices in reverse elimination order, each vertex v with earlier
    neighbours S contributes ``I(S ∪ {v}) / I(S)``; this telescopes to the
    usual clique/separator product.
    """
    order = perfect_elimination_order(params.G)
    if order is None:
        raise NotDecomposable("graph is not decomposable")
    D = params.D
    adj = params.G.adj
    total = 0.0
    seen = []
    for v in order:
        sep = [w for w in seen if adj[v, w]]
        clique = sep + [v]
        total += log_norm_const_complete(params.delta, D[np.ix_(clique, clique)])
        if sep:
            total -= log_norm_const_complete(params.delta, D[np.ix_(sep, sep)])
        seen.append(v)
    return float(total)
