"""Single-factor graphical model for one dataset.

Model::

    X_j = alpha + lambda * f_j + e_j,   e_j ~ N(0, K^{-1}),   f_j ~ N(0, 1)
    alpha ~ N(0, I / n0),   lambda | K, Delta ~ N(0, Delta K^{-1}),
    Delta ~ IG(c, c d / 2),  K | G ~ W_G(delta, D),  G ~ size-based prior on
    identifiable graphs.

The graph/precision block is updated by a sweep of single-edge exchange
moves restricted to identifiable graphs; the remaining blocks by their
conjugate full conditionals.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .errors import (DimensionMismatch, EmptyTrace, InvalidParameter,
                     InvariantViolation, NoConvergence, NonIdentifiableStart)
from .graphs import GraphPrior, UndirectedGraph, is_identifiable
from .gwishart import GWishartParams, gwishart_gibbs_sweep, in_cone
from .numerics import cholesky, make_rng, sample_inverse_gamma, spd_logdet

__all__ = [
    "Hyperparams",
    "SFGMState",
    "Trace",
    "BayesFactor",
    "idcbf_sweep",
    "update_factors",
    "update_alpha",
    "update_lambda",
    "update_delta",
    "gibbs_iteration",
    "log_joint_density",
    "check_state",
    "initial_state",
    "fit_sfgm",
    "run_chains",
    "align_loadings",
    "bayes_factor_loading",
    "evidence_label",
    "posterior_summaries",
]

# cap on accept-reject proposals for one auxiliary prior draw
EXACT_MAX_ATTEMPTS = 1000000


@dataclass(frozen=True)
class Hyperparams:
    n0: float = 0.1
    c: float = 2.0
    d: float = 1.0
    delta: float = 3.0
    D: np.ndarray = None
    epsilon: float = 0.01

    def __post_init__(self):
        for name in ("n0", "c", "d", "epsilon"):
            if not getattr(self, name) > 0:
                raise InvalidParameter("%s must be positive" % name)
        if not self.delta > 2:
            raise InvalidParameter("delta must exceed 2")

    def rate(self, p):
        """G-Wishart rate matrix (identity unless D was given)."""
        if self.D is None:
            return np.eye(p)
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.shape != (p, p):
            raise DimensionMismatch("D is %s, expected (%d, %d)" % (D.shape, p, p))
        return D


@dataclass
class SFGMState:
    alpha: np.ndarray
    lam: np.ndarray
    f: np.ndarray
    K: np.ndarray
    G: UndirectedGraph
    Delta: float

    @property
    def p(self):
        return self.alpha.shape[0]

    def copy(self):
        return SFGMState(self.alpha.copy(), self.lam.copy(), self.f.copy(),
                         self.K.copy(), self.G, float(self.Delta))


@dataclass
class Trace:
    """Post-burn-in draws of one or more chains, stacked along axis 0."""

    alpha: np.ndarray
    lam: np.ndarray
    Delta: np.ndarray
    adj: np.ndarray
    K: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    f: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.alpha.shape[0]

    @property
    def p(self):
        return self.alpha.shape[1]

    def edge_indicators(self):
        """(T, m) 0/1 array over pairs v < w in lexicographic order."""
        iu = np.triu_indices(self.p, 1)
        return self.adj[:, iu[0], iu[1]].astype(np.int8)

    def select(self, mask):
        extra = {k: v[mask] for k, v in self.extra.items()}
        return Trace(self.alpha[mask], self.lam[mask], self.Delta[mask],
                     self.adj[mask], self.K[mask], self.chain[mask],
                     self.iteration[mask], None if self.f is None else self.f[mask],
                     extra)

    @classmethod
    def concatenate(cls, traces):
        traces = list(traces)
        if not traces:
            raise EmptyTrace("nothing to concatenate")
        has_f = all(t.f is not None for t in traces)
        keys = set(traces[0].extra)
        for t in traces[1:]:
            keys &= set(t.extra)
        cat = lambda name: np.concatenate([getattr(t, name) for t in traces])
        return cls(cat("alpha"), cat("lam"), cat("Delta"), cat("adj"), cat("K"),
                   cat("chain"), cat("iteration"),
                   np.concatenate([t.f for t in traces]) if has_f else None,
                   {k: np.concatenate([t.extra[k] for t in traces]) for k in sorted(keys)})


class _Recorder:
    def __init__(self, size, p, n, chain, store_f, extra_shapes):
        self.alpha = np.empty((size, p))
        self.lam = np.empty((size, p))
        self.Delta = np.empty(size)
        self.adj = np.empty((size, p, p), dtype=bool)
        self.K = np.empty((size, p, p))
        self.f = np.empty((size, n)) if store_f else None
        self.iteration = np.empty(size, dtype=np.int64)
        self.extra = {k: np.empty((size,) + tuple(s)) for k, s in extra_shapes.items()}
        self.chain = chain
        self.i = 0

    def add(self, it, state, extra=None):
        i = self.i
        self.alpha[i] = state.alpha
        self.lam[i] = state.lam
        self.Delta[i] = state.Delta
        self.adj[i] = state.G.adj
        self.K[i] = state.K
        if self.f is not None:
            self.f[i] = state.f
        for k, v in (extra or {}).items():
            self.extra[k][i] = v
        self.iteration[i] = it
        self.i += 1

    def trace(self):
        size = self.i
        return Trace(self.alpha[:size], self.lam[:size], self.Delta[:size],
                     self.adj[:size], self.K[:size],
                     np.full(size, self.chain, dtype=np.int64), self.iteration[:size],
                     None if self.f is None else self.f[:size],
                     {k: v[:size] for k, v in self.extra.items()})


# ---------------------------------------------------------------------------
# graph / precision block

def idcbf_sweep(state, residual_data, hyper, rng, restrict=True):
    """One sweep of identifiability-restricted exchange moves, then a fresh K.

    Every vertex pair (v, w), v < w, is visited in lexicographic order.  The
    flipped graph is skipped when ``restrict`` is set and it is not
    identifiable.  Otherwise an auxiliary K0 is drawn from the prior
    G-Wishart on the flipped graph and the flip is accepted with the exchange
    probability, in which both normalising constants cancel.  After each pair
    the two Cholesky coordinates it owns are redrawn from their exact
    conditional, which keeps the sweep a valid Gibbs/MH composition on
    (K, G).  The auxiliary draws are exact (accept-reject) and the sweep
    ends with a column-wise Gibbs pass over K that leaves
    ``W_G(delta + n, D + S)`` invariant.

    Parameters
    ----------
    residual_data : (n, p) array
        Rows whose cross-product ``S`` is the sufficient statistic of K.

    Returns
    -------
    G, K, n_accept
    """
    R = np.atleast_2d(np.asarray(residual_data, dtype=float))
    n, p = R.shape
    if p != state.p:
        raise DimensionMismatch("residuals have p=%d, state has p=%d" % (p, state.p))
    D = hyper.rate(p)
    Dpost = D + R.T @ R
    delta_post = hyper.delta + n
    m = p * (p - 1) // 2
    lp = GraphPrior(p).log_prior_by_size()

    u = rng.random(m)
    chi_post = rng.chisquare(delta_post, size=m)
    z_post = rng.standard_normal(m)
    seed = int(rng.integers(0, 2**31 - 1))
    K, adj, n_acc, status = _kernels.idcbf_sweep_kernel(
        np.ascontiguousarray(state.K), np.ascontiguousarray(state.G.adj),
        np.ascontiguousarray(D), np.ascontiguousarray(Dpost), float(hyper.delta),
        lp, bool(restrict), u, chi_post, z_post, EXACT_MAX_ATTEMPTS, seed)
    if status != _kernels.STATUS_OK:
        raise NoConvergence("auxiliary prior draw rejected %d times" % EXACT_MAX_ATTEMPTS)
    G = UndirectedGraph(adj)
    K = gwishart_gibbs_sweep(K, GWishartParams(delta_post, Dpost, G), rng)
    return G, K, int(n_acc)


# ---------------------------------------------------------------------------
# conjugate blocks

def update_factors(state, data, rng, prior_mean=0.0):
    """Draw every f_j from N(m_j, 1/q) with ``q = 1 + lam' K lam`` and
    ``m_j = (lam' K (x_j - alpha) + prior_mean) / q``.
    """
    X = np.atleast_2d(data)
    Kl = state.K @ state.lam
    q = 1.0 + state.lam @ Kl
    mean = ((X - state.alpha) @ Kl + prior_mean) / q
    return mean + rng.standard_normal(X.shape[0]) / np.sqrt(q)


def _draw_precision_normal(P, b, rng):
    # x ~ N(P^{-1} b, P^{-1})
    L = cholesky(P)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y + rng.standard_normal(b.shape[0]), lower=False)


def update_alpha(state, data, hyper, rng):
    """alpha ~ N((nK + n0 I)^{-1} K sum_j (x_j - lam f_j), (nK + n0 I)^{-1})."""
    X = np.atleast_2d(data)
    n, p = X.shape
    P = n * state.K + hyper.n0 * np.eye(p)
    r = (X - np.outer(state.f, state.lam)).sum(axis=0)
    return _draw_precision_normal(P, state.K @ r, rng)


def update_lambda(state, data, rng):
    """lam ~ N(s^{-1} sum_j f_j (x_j - alpha), (s K)^{-1}) with
    ``s = 1/Delta + sum_j f_j^2``.
    """
    X = np.atleast_2d(data)
    s = 1.0 / state.Delta + state.f @ state.f
    mean = state.f @ (X - state.alpha) / s
    L = cholesky(state.K)
    noise = solve_triangular(L.T, rng.standard_normal(state.p), lower=False)
    return mean + noise / np.sqrt(s)


def update_delta(state, hyper, rng):
    """Delta ~ IG(c + p/2, (c d + lam' K lam) / 2)."""
    quad = state.lam @ state.K @ state.lam
    shape = hyper.c + 0.5 * state.p
    rate = 0.5 * (hyper.c * hyper.d + quad)
    return float(sample_inverse_gamma(shape, rate, rng))


def gibbs_iteration(state, data, hyper, rng, restrict=True, update_graph=True,
                    estimate_alpha=True, factor_prior_mean=0.0):
    """One full scan: (G, K), then f, alpha, lambda, Delta.

    The residual rows passed to the edge sweep are ``x_j - alpha - lam f_j``
    together with the pseudo-row ``lam / sqrt(Delta)``, which carries the
    dependence of the loading prior on K.
    """
    X = np.atleast_2d(data)
    state = state.copy()
    if update_graph:
        R = X - state.alpha - np.outer(state.f, state.lam)
        R = np.vstack([R, state.lam / np.sqrt(state.Delta)])
        state.G, state.K, _ = idcbf_sweep(state, R, hyper, rng, restrict=restrict)
    state.f = update_factors(state, X, rng, prior_mean=factor_prior_mean)
    if estimate_alpha:
        state.alpha = update_alpha(state, X, hyper, rng)
    state.lam = update_lambda(state, X, rng)
    state.Delta = update_delta(state, hyper, rng)
    return state


# ---------------------------------------------------------------------------
# density, invariants, initialisation

def log_joint_density(state, data, hyper, factor_prior_mean=0.0):
    """Unnormalised log posterior, up to the G-Wishart prior constant of G."""
    X = np.atleast_2d(data)
    n, p = X.shape
    K = state.K
    logdetK = spd_logdet(K)
    R = X - state.alpha - np.outer(state.f, state.lam)
    out = 0.5 * n * logdetK - 0.5 * np.sum((R @ K) * R)
    out += -0.5 * np.sum((state.f - factor_prior_mean) ** 2)
    out += -0.5 * hyper.n0 * state.alpha @ state.alpha
    out += 0.5 * logdetK - 0.5 * p * np.log(state.Delta) \
        - 0.5 * state.lam @ K @ state.lam / state.Delta
    out += -(hyper.c + 1.0) * np.log(state.Delta) - 0.5 * hyper.c * hyper.d / state.Delta
    D = hyper.rate(p)
    out += 0.5 * (hyper.delta - 2.0) * logdetK - 0.5 * np.sum(K * D)
    out += GraphPrior(p).log_prior_by_size()[state.G.size()]
    return float(out)


def check_state(state, restrict=True):
    """Raise InvariantViolation unless G is identifiable and K lies in M+(G)."""
    if restrict and not is_identifiable(state.G):
        raise InvariantViolation("graph is not identifiable: %r" % (state.G,))
    if not in_cone(state.K, state.G):
        raise InvariantViolation("K is not in the cone of the current graph")
    if not state.Delta > 0:
        raise InvariantViolation("Delta must be positive")


def initial_state(data, hyper, restrict=True, estimate_alpha=True):
    """Start at the empty graph with moment-based alpha and loadings.

    Loadings start at the leading principal direction scaled by the square
    root of its eigenvalue, signed so that they sum to a positive number.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = X.shape
    G = UndirectedGraph.empty(p)
    if restrict and not is_identifiable(G):
        raise NonIdentifiableStart("no identifiable graph exists for p=%d" % p)
    alpha = X.mean(axis=0) if estimate_alpha else np.zeros(p)
    Xc = X - alpha
    C = Xc.T @ Xc / max(n, 1)
    w, V = np.linalg.eigh(C + 1e-6 * np.eye(p))
    lam = V[:, -1] * np.sqrt(max(w[-1] - np.median(w[:-1]) if p > 1 else w[-1], 1e-3))
    if lam.sum() < 0:
        lam = -lam
    resid_var = np.clip(np.diag(C) - lam ** 2, 0.1, None)
    K = np.diag(1.0 / resid_var)
    Kl = K @ lam
    f = Xc @ Kl / (1.0 + lam @ Kl)
    return SFGMState(alpha, lam, f, K, G, 1.0)


def fit_sfgm(data, hyper=None, iterations=1000, burn_in=0, rng=None, seed=0,
             chain=0, state=None, restrict=True, check_invariants=False,
             store_f=False, estimate_alpha=True):
    """Run one chain; returns the Trace of the ``iterations - burn_in``
    post-burn-in draws.
    """
    hyper = hyper or Hyperparams()
    if not iterations > burn_in >= 0:
        raise InvalidParameter("need iterations > burn_in >= 0")
    X = np.atleast_2d(np.asarray(data, dtype=float))
    rng = rng if rng is not None else make_rng(seed, chain)
    if state is None:
        state = initial_state(X, hyper, restrict=restrict, estimate_alpha=estimate_alpha)
    rec = _Recorder(iterations - burn_in, X.shape[1], X.shape[0], chain, store_f, {})
    for it in range(iterations):
        state = gibbs_iteration(state, X, hyper, rng, restrict=restrict,
                                estimate_alpha=estimate_alpha)
        if check_invariants:
            check_state(state, restrict)
        if it >= burn_in:
            rec.add(it, state)
    return rec.trace()


def run_chains(fit, chains, seed, **kwargs):
    """Run ``fit(rng=..., chain=c, **kwargs)`` for each chain and stack the traces.

    Chain c uses the stream ``(seed, c)``; chains run one after another.
    """
    return Trace.concatenate(fit(rng=make_rng(seed, c), chain=c, **kwargs)
                             for c in range(chains))


# ---------------------------------------------------------------------------
# summaries

def align_loadings(trace):
    """Resolve the (lam, f) -> (-lam, -f) symmetry draw by draw.

    The posterior is invariant under the joint sign change, so point
    estimates of lam are taken after flipping every draw whose loadings sum
    to a negative number.
    """
    sign = np.where(trace.lam.sum(axis=1) < 0, -1.0, 1.0)
    out = trace.select(np.arange(len(trace)))
    out.lam = trace.lam * sign[:, None]
    if trace.f is not None:
        out.f = trace.f * sign[:, None]
    return out


@dataclass(frozen=True)
class BayesFactor:
    variable: int
    value: float
    label: str
    abs_mean: float
    abs_lower: float
    abs_upper: float


_KR_CUTS = ((100.0, "Decisive"), (10.0, "Strong"), (3.2, "Substantial"),
            (1.0, "Not worth more than a bare mention"))


def evidence_label(bf):
    """Kass-Raftery category of a Bayes factor."""
    for cut, label in _KR_CUTS:
        if bf > cut:
            return label
    return "Negative"


def bayes_factor_loading(trace, v, epsilon=0.01):
    """Sample-count Bayes factor of ``|lam_v| > epsilon`` against ``<= epsilon``.

    ``v`` is 1-indexed.  When one bucket is empty both get half a count.
    """
    if len(trace) == 0:
        raise EmptyTrace("trace has no draws")
    a = np.abs(trace.lam[:, v - 1])
    above = float(np.sum(a > epsilon))
    below = float(a.size - above)
    if above == 0 or below == 0:
        above += 0.5
        below += 0.5
    bf = above / below
    lo, hi = np.percentile(a, [2.5, 97.5])
    return BayesFactor(v, bf, evidence_label(bf), float(a.mean()), float(lo), float(hi))


def _interval(x):
    lo, hi = np.percentile(x, [2.5, 97.5], axis=0)
    return {"mean": x.mean(axis=0), "lower": lo, "upper": hi}


def posterior_summaries(trace, epsilon=0.01):
    """PIPs, median graph, parameter means with 95% intervals, loading Bayes
    factors and the running mean of the edge count (per chain).
    """
    if len(trace) == 0:
        raise EmptyTrace("trace has no draws")
    pip = trace.adj.mean(axis=0)
    median = UndirectedGraph(pip > 0.5)
    sizes = trace.adj.sum(axis=(1, 2)) // 2
    running = {}
    for c in np.unique(trace.chain):
        s = sizes[trace.chain == c].astype(float)
        running[int(c)] = np.cumsum(s) / np.arange(1, s.size + 1)
    return {
        "n_draws": len(trace),
        "pip": pip,
        "median_graph": median,
        "alpha": _interval(trace.alpha),
        "lambda": _interval(trace.lam),
        "Delta": _interval(trace.Delta),
        "K": _interval(trace.K),
        "bayes_factors": [bayes_factor_loading(trace, v, epsilon) for v in range(1, trace.p + 1)],
        "expected_edges": running,
    }
