"""Latent Gaussian layer for categorical data.

Two observation models sit on top of the single-factor model for latent
``Z``:

* probit: ``X_v = 1{Z_v > 0}`` for binary variables, ``alpha`` estimated;
* copula (extended rank likelihood): only the ordering of ``X_v`` is used,
  ``alpha`` is fixed at zero.

The rescaled latent ``Z~_v = Z_v / sqrt((K^{-1})_vv)`` differs from ``Z_v`` by
a positive per-column factor, so sign and rank constraints may be imposed on
either scale; the samplers work on ``Z``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import (DataFormatError, DimensionMismatch, EmptyTrace,
                     InvalidParameter, InvariantViolation)
from .numerics import make_rng, sample_truncated_normal, spd_inverse
from .sfgm import (Hyperparams, _Recorder, check_state, gibbs_iteration,
                   initial_state)

__all__ = [
    "CategoricalDataset",
    "LatentMatrix",
    "read_contingency_table",
    "table_to_dataset",
    "cell_index",
    "probit_latent_update",
    "rank_bounds",
    "copula_latent_update",
    "check_latent",
    "binary_cuts",
    "expected_cell_counts",
    "fit_latent",
]

KINDS = ("binary", "ordinal", "continuous")


@dataclass(frozen=True)
class CategoricalDataset:
    """n x p observations; NaN marks a missing entry."""

    X: np.ndarray
    kinds: tuple

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        kinds = tuple(self.kinds)
        if len(kinds) != X.shape[1]:
            raise DimensionMismatch("%d kinds for %d columns" % (len(kinds), X.shape[1]))
        for v, kind in enumerate(kinds):
            if kind not in KINDS:
                raise InvalidParameter("unknown variable kind %r" % (kind,))
            col = X[:, v][~np.isnan(X[:, v])]
            if kind == "binary" and not np.all((col == 0) | (col == 1)):
                raise DataFormatError("binary column %d has values other than 0/1" % (v + 1))
            if kind == "ordinal" and np.unique(col).size < 2:
                raise DataFormatError("ordinal column %d has fewer than two levels" % (v + 1))
        X.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "kinds", kinds)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def missing(self):
        return np.isnan(self.X)

    @property
    def all_binary(self):
        return all(k == "binary" for k in self.kinds)


@dataclass
class LatentMatrix:
    Z: np.ndarray

    def ztilde(self, K):
        """``Z / sqrt(diag(K^{-1}))`` column by column."""
        scale = np.sqrt(np.diag(spd_inverse(K)))
        return self.Z / scale


# ---------------------------------------------------------------------------
# contingency tables

def read_contingency_table(path):
    """Parse ``vars: a b c ...`` followed by the cell counts.

    Counts run through the cells in lexicographic order with the last
    variable varying fastest.  A variable may be written ``name:levels``;
    the default is two levels.

    Returns
    -------
    names : list of str
    levels : list of int
    counts : ndarray of int, shape ``levels``
    """
    with open(path) as fh:
        text = [ln.split("#", 1)[0] for ln in fh]
    tokens = " ".join(text).split()
    if not tokens or tokens[0] != "vars:":
        raise DataFormatError("%s: table must start with 'vars:'" % path)
    names, levels, i = [], [], 1
    while i < len(tokens) and not tokens[i].lstrip("-").isdigit():
        name, _, lev = tokens[i].partition(":")
        names.append(name)
        levels.append(int(lev) if lev else 2)
        i += 1
    try:
        counts = np.array([int(t) for t in tokens[i:]], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError("%s: %s" % (path, exc)) from None
    if counts.size != int(np.prod(levels)):
        raise DataFormatError("%s: expected %d counts, found %d"
                              % (path, int(np.prod(levels)), counts.size))
    if np.any(counts < 0):
        raise DataFormatError("%s: negative count" % path)
    return names, levels, counts.reshape(levels)


def table_to_dataset(counts):
    """Expand a count array into one row per observation (cells in C order)."""
    counts = np.asarray(counts)
    cells = np.array(list(np.ndindex(*counts.shape)), dtype=float)
    rows = np.repeat(cells, counts.ravel(), axis=0)
    kinds = ["binary" if L == 2 else "ordinal" for L in counts.shape]
    return CategoricalDataset(rows, kinds)


def cell_index(X, levels):
    """Flat C-order cell index of each row of integer-coded ``X``."""
    return np.ravel_multi_index(tuple(np.asarray(X, dtype=np.int64).T), tuple(levels))


# ---------------------------------------------------------------------------
# latent updates

def _conditional(Z, state, v):
    """Mean and variance of Z_v given the other columns, for every row."""
    K = state.K
    mean_all = state.alpha + np.outer(state.f, state.lam)
    R = Z - mean_all
    kv = K[v].copy()
    kv[v] = 0.0
    mean = mean_all[:, v] - R @ kv / K[v, v]
    return mean, 1.0 / K[v, v]


def probit_latent_update(Z, X, state, rng):
    """Redraw every latent entry from its conditional normal, truncated to
    (0, inf) where X=1, to (-inf, 0) where X=0, and not at all where X is
    missing.  Rows are independent, so each column is drawn in one block.
    """
    Z = Z.Z.copy()
    data = X.X
    for v in range(Z.shape[1]):
        mean, var = _conditional(Z, state, v)
        x = data[:, v]
        lower = np.where(x == 1, 0.0, -np.inf)
        upper = np.where(x == 0, 0.0, np.inf)
        Z[:, v] = sample_truncated_normal(mean, var, lower, upper, rng)
    return LatentMatrix(Z)


def rank_bounds(Ztilde, X, v, j):
    """Open interval allowed for entry (j, v) by the ranks of column v.

    ``v`` and ``j`` are 1-indexed.  The lower bound is the largest latent
    value among samples with a strictly smaller observation, the upper bound
    the smallest among samples with a strictly larger one; an empty set gives
    an infinite bound and missing observations impose nothing.
    """
    Zt = np.asarray(Ztilde, dtype=float)
    x = (X.X if isinstance(X, CategoricalDataset) else np.asarray(X, dtype=float))[:, v - 1]
    z = Zt[:, v - 1]
    xj = x[j - 1]
    if np.isnan(xj):
        return -np.inf, np.inf
    below = x < xj
    above = x > xj
    lower = z[below].max() if below.any() else -np.inf
    upper = z[above].min() if above.any() else np.inf
    return float(lower), float(upper)


def _level_codes(x):
    """Dense level index of each observed entry (-1 where missing)."""
    codes = np.full(x.shape, -1, dtype=np.int64)
    obs = ~np.isnan(x)
    _, codes[obs] = np.unique(x[obs], return_inverse=True)
    return codes


def copula_latent_update(Z, X, state, rng, codes=None):
    """Gibbs update of every latent entry under the extended rank likelihood.

    Entries on levels of equal parity do not constrain each other, so each
    column is updated in two blocks (odd levels, then even levels), every
    entry being drawn from its exact conditional truncated to the open
    interval between the neighbouring levels.  Missing entries are drawn
    without truncation.
    """
    Z = Z.Z.copy()
    data = X.X
    for v in range(Z.shape[1]):
        code = _level_codes(data[:, v]) if codes is None else codes[:, v]
        nlev = code.max() + 1
        miss = code < 0
        for parity in (1, 0):
            mean, var = _conditional(Z, state, v)
            z = Z[:, v]
            hi = np.full(nlev + 1, -np.inf)
            lo = np.full(nlev + 1, np.inf)
            obs = ~miss
            np.maximum.at(hi, code[obs], z[obs])
            np.minimum.at(lo, code[obs], z[obs])
            sel = (code % 2 == parity) & obs
            c = code[sel]
            lower = np.where(c > 0, hi[np.maximum(c - 1, 0)], -np.inf)
            upper = lo[c + 1]
            Z[sel, v] = sample_truncated_normal(mean[sel], var, lower, upper, rng)
        if miss.any():
            mean, var = _conditional(Z, state, v)
            Z[miss, v] = mean[miss] + np.sqrt(var) * rng.standard_normal(int(miss.sum()))
    return LatentMatrix(Z)


def check_latent(Z, X, mode):
    """Raise InvariantViolation unless Z agrees with X (signs or ranks)."""
    Z = Z.Z if isinstance(Z, LatentMatrix) else Z
    data = X.X
    for v in range(data.shape[1]):
        x = data[:, v]
        obs = ~np.isnan(x)
        z = Z[obs, v]
        xo = x[obs]
        if mode == "probit":
            if np.any((z > 0) != (xo == 1)):
                raise InvariantViolation("sign of Z disagrees with X in column %d" % (v + 1))
        else:
            code = _level_codes(xo)
            nlev = code.max() + 1
            hi = np.full(nlev, -np.inf)
            lo = np.full(nlev, np.inf)
            np.maximum.at(hi, code, z)
            np.minimum.at(lo, code, z)
            if np.any(hi[:-1] >= lo[1:]):
                raise InvariantViolation("ranks of Z disagree with X in column %d" % (v + 1))


def binary_cuts(Z, X):
    """Per-column threshold between the two classes of a binary column:
    midpoint of the largest latent value with X=0 and the smallest with X=1.
    """
    Z = Z.Z if isinstance(Z, LatentMatrix) else Z
    data = X.X
    cuts = np.zeros(data.shape[1])
    for v in range(data.shape[1]):
        x = data[:, v]
        z0 = Z[x == 0, v]
        z1 = Z[x == 1, v]
        a = z0.max() if z0.size else -np.inf
        b = z1.min() if z1.size else np.inf
        if np.isfinite(a) and np.isfinite(b):
            cuts[v] = 0.5 * (a + b)
        else:
            cuts[v] = a if np.isfinite(a) else b
    return cuts


# ---------------------------------------------------------------------------
# expected cell counts

def expected_cell_counts(trace, n, rng, n_latent=200, thin=1, mode=None):
    """Posterior expected counts of a binary contingency table.

    For every retained draw, ``n_latent`` latent vectors are sampled from
    ``N(alpha, lam lam' + K^{-1})`` and dichotomised (at zero for the probit
    model, at the draw's class cuts for the copula model); cell frequencies
    are averaged over draws and scaled to ``n``.

    Returns
    -------
    ndarray of shape ``(2,) * p`` in C order.
    """
    if len(trace) == 0:
        raise EmptyTrace("trace has no draws")
    if mode is None:
        mode = "copula" if "cuts" in trace.extra else "probit"
    p = trace.p
    idx = np.arange(0, len(trace), thin)
    weights = 1 << np.arange(p - 1, -1, -1)
    freq = np.zeros(2 ** p)
    for t in idx:
        lam = trace.lam[t]
        S = np.outer(lam, lam) + spd_inverse(trace.K[t])
        L = np.linalg.cholesky(S)
        Z = trace.alpha[t] + rng.standard_normal((n_latent, p)) @ L.T
        cut = trace.extra["cuts"][t] if mode == "copula" else 0.0
        cells = (Z > cut).astype(np.int64) @ weights
        freq += np.bincount(cells, minlength=2 ** p)
    freq *= n / (idx.size * n_latent)
    return freq.reshape((2,) * p)


# ---------------------------------------------------------------------------
# driver

def _initial_latent(X, mode, rng):
    data = X.X
    n, p = data.shape
    Z = np.empty((n, p))
    for v in range(p):
        x = data[:, v]
        obs = ~np.isnan(x)
        if mode == "probit":
            lower = np.where(x == 1, 0.0, -np.inf)
            upper = np.where(x == 0, 0.0, np.inf)
            Z[:, v] = sample_truncated_normal(0.0, 1.0, lower, upper, rng)
        else:
            # normal scores of the (tie-averaged) ranks
            r = rankdata(x[obs])
            Z[obs, v] = ndtri(r / (obs.sum() + 1.0))
            Z[~obs, v] = rng.standard_normal(int((~obs).sum()))
    return LatentMatrix(Z)


def fit_latent(X, mode="probit", hyper=None, iterations=1000, burn_in=0, rng=None,
               seed=0, chain=0, restrict=True, check_invariants=False):
    """One chain of the probit (``mode="probit"``) or copula
    (``mode="copula"``) single-factor model.

    Each iteration updates the model parameters given the latent data and
    then the latent data given the parameters.  For all-binary copula fits
    the class cuts of every draw are kept in ``trace.extra["cuts"]``.
    """
    if mode not in ("probit", "copula"):
        raise InvalidParameter("mode must be 'probit' or 'copula'")
    if mode == "probit" and not X.all_binary:
        raise DataFormatError("the probit model needs binary variables")
    hyper = hyper or Hyperparams()
    if not iterations > burn_in >= 0:
        raise InvalidParameter("need iterations > burn_in >= 0")
    rng = rng if rng is not None else make_rng(seed, chain)
    estimate_alpha = mode == "probit"
    Z = _initial_latent(X, mode, rng)
    state = initial_state(Z.Z, hyper, restrict=restrict, estimate_alpha=estimate_alpha)
    keep_cuts = mode == "copula" and X.all_binary
    codes = np.column_stack([_level_codes(X.X[:, v]) for v in range(X.p)])
    rec = _Recorder(iterations - burn_in, X.p, X.n, chain, False,
                    {"cuts": (X.p,)} if keep_cuts else {})
    for it in range(iterations):
        state = gibbs_iteration(state, Z.Z, hyper, rng, restrict=restrict,
                                estimate_alpha=estimate_alpha)
        if mode == "probit":
            Z = probit_latent_update(Z, X, state, rng)
        else:
            Z = copula_latent_update(Z, X, state, rng, codes=codes)
        if check_invariants:
            check_state(state, restrict)
            check_latent(Z, X, mode)
        if it >= burn_in:
            rec.add(it, state, {"cuts": binary_cuts(Z, X)} if keep_cuts else None)
    return rec.trace()
