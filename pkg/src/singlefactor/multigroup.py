"""Single-factor graphical models for several datasets with correlated
factor means.

Group l has its own single-factor model; its factors have mean ``mu_l`` and

    mu ~ N_L(0, Kmu^{-1}),   Kmu ~ W_{Gmu}(delta_mu, Dmu)

on a fixed structure graph ``Gmu`` (temporal AR graph or spatial
neighbourhood graph).
"""
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, InvalidParameter, InvariantViolation,
                     NoConvergence)
from .graphs import UndirectedGraph
from .gwishart import (GWishartParams, gwishart_gibbs_sweep, in_cone,
                       sample_gwishart_exact)
from .latent import (CategoricalDataset, _initial_latent, _level_codes,
                     check_latent, copula_latent_update, probit_latent_update)
from .numerics import make_rng
from .sfgm import (Hyperparams, _Recorder, check_state, gibbs_iteration,
                   initial_state, update_factors)

__all__ = [
    "MultiGroupState",
    "MultiGroupTrace",
    "update_group_factors",
    "update_mu",
    "update_Kmu",
    "shift_group_location",
    "check_multigroup",
    "fit_multigroup",
]

# accept-reject proposals tried for Kmu before falling back to a Gibbs sweep
KMU_MAX_ATTEMPTS = 200


@dataclass
class MultiGroupState:
    groups: list
    n: np.ndarray
    mu: np.ndarray
    Kmu: np.ndarray
    Gmu: UndirectedGraph
    delta_mu: float = 3.0
    Dmu: np.ndarray = None

    def __post_init__(self):
        L = len(self.groups)
        self.n = np.asarray(self.n, dtype=np.int64)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.n.shape != (L,) or self.mu.shape != (L,) or self.Gmu.p != L:
            raise DimensionMismatch("group count, n, mu and Gmu disagree")
        if self.Dmu is None:
            self.Dmu = np.eye(L)
        if not self.delta_mu > 2:
            raise InvalidParameter("delta_mu must exceed 2")

    @property
    def L(self):
        return len(self.groups)


@dataclass
class MultiGroupTrace:
    groups: list
    mu: np.ndarray
    Kmu: np.ndarray

    def __len__(self):
        return self.mu.shape[0]


def update_group_factors(state, data, rng):
    """Draw each group's factors with prior mean ``mu_l``; returns a list."""
    return [update_factors(g, X, rng, prior_mean=m)
            for g, X, m in zip(state.groups, data, state.mu)]


def update_mu(state, rng):
    """Scalar Gibbs sweep over mu_l: precision ``n_l + (Kmu)_ll``, mean
    ``(sum_j f_lj - sum_{l' != l} (Kmu)_{ll'} mu_{l'}) / (n_l + (Kmu)_ll)``.
    """
    mu = state.mu.copy()
    K = state.Kmu
    for l in range(state.L):
        f = state.groups[l].f
        prec = state.n[l] + K[l, l]
        off = K[l] @ mu - K[l, l] * mu[l]
        mean = (f.sum() - off) / prec
        mu[l] = mean + rng.standard_normal() / np.sqrt(prec)
    return mu


def update_Kmu(state, rng, max_attempts=KMU_MAX_ATTEMPTS):
    """Update Kmu against W_{Gmu}(delta_mu + 1, Dmu + mu mu').

    An independent accept-reject draw is tried first; if none of
    ``max_attempts`` proposals is accepted, one column-wise Gibbs sweep from
    the current Kmu is taken instead.  The switch does not depend on the
    current state, so the mixture keeps the full conditional invariant.
    """
    params = GWishartParams(state.delta_mu + 1.0, state.Dmu + np.outer(state.mu, state.mu),
                            state.Gmu)
    try:
        return sample_gwishart_exact(params, rng, max_attempts)
    except NoConvergence:
        return gwishart_gibbs_sweep(state.Kmu, params, rng)


def shift_group_location(state, hyper, rng):
    """Exact draw along the ridge that the likelihood cannot resolve.

    For each group the map ``(alpha_l, f_l, mu_l) -> (alpha_l - lam_l c,
    f_l + c, mu_l + c)`` leaves the likelihood and the factor prior
    unchanged; only the alpha and mu priors depend on ``c``, and their
    product is Gaussian in ``c``.  The translation has unit Jacobian, so
    drawing ``c`` from that Gaussian is a valid Gibbs step on the group
    orbit.  Without it alpha_l and mu_l mix very slowly.
    """
    mu = state.mu.copy()
    K = state.Kmu
    for l, g in enumerate(state.groups):
        lam = g.lam
        prec = hyper.n0 * (lam @ lam) + K[l, l]
        mean = (hyper.n0 * (lam @ g.alpha) - K[l] @ mu) / prec
        c = mean + rng.standard_normal() / np.sqrt(prec)
        g.alpha = g.alpha - lam * c
        g.f = g.f + c
        mu[l] += c
    return mu


def check_multigroup(state, restrict=True):
    for g in state.groups:
        check_state(g, restrict)
    if not in_cone(state.Kmu, state.Gmu):
        raise InvariantViolation("Kmu is not in the cone of Gmu")


def _align_signs(trace_groups, mu):
    # flipping (lam_l, f_l, mu_l) together leaves the posterior unchanged
    mu = mu.copy()
    for l, tr in enumerate(trace_groups):
        sign = np.where(tr.lam.sum(axis=1) < 0, -1.0, 1.0)
        tr.lam = tr.lam * sign[:, None]
        mu[:, l] *= sign
    return mu


def fit_multigroup(data, Gmu, hyper=None, iterations=1000, burn_in=0, rng=None, seed=0,
                   chain=0, delta_mu=3.0, Dmu=None, mode="gaussian", restrict=True,
                   check_invariants=False, align=True):
    """One chain of the multi-dataset model.

    Parameters
    ----------
    data : list
        One (n_l, p) array per group, or CategoricalDataset objects when
        ``mode`` is ``"probit"`` or ``"copula"``.
    Gmu : UndirectedGraph
        Fixed structure graph on the L groups.
    align : bool
        Resolve the per-group sign symmetry draw by draw (positive loading
        sum) in the returned trace.

    Returns
    -------
    MultiGroupTrace
    """
    if mode not in ("gaussian", "probit", "copula"):
        raise InvalidParameter("unknown mode %r" % (mode,))
    hyper = hyper or Hyperparams()
    if not iterations > burn_in >= 0:
        raise InvalidParameter("need iterations > burn_in >= 0")
    L = len(data)
    if Gmu.p != L:
        raise DimensionMismatch("Gmu has %d vertices for %d groups" % (Gmu.p, L))
    rng = rng if rng is not None else make_rng(seed, chain)

    latent = mode != "gaussian"
    if latent:
        if not all(isinstance(d, CategoricalDataset) for d in data):
            raise InvalidParameter("latent modes need CategoricalDataset groups")
        Z = [_initial_latent(d, mode, rng) for d in data]
        codes = [np.column_stack([_level_codes(d.X[:, v]) for v in range(d.p)]) for d in data]
        work = [z.Z for z in Z]
    else:
        work = [np.atleast_2d(np.asarray(d, dtype=float)) for d in data]
    ps = {X.shape[1] for X in work}
    if len(ps) != 1:
        raise DimensionMismatch("every group must have the same number of variables")
    estimate_alpha = mode != "copula"
    groups = [initial_state(X, hyper, restrict=restrict, estimate_alpha=estimate_alpha)
              for X in work]
    state = MultiGroupState(groups, [X.shape[0] for X in work], np.zeros(L), np.eye(L),
                            Gmu, delta_mu, Dmu)

    recs = [_Recorder(iterations - burn_in, X.shape[1], X.shape[0], chain, False, {})
            for X in work]
    mu_rec = np.empty((iterations - burn_in, L))
    Kmu_rec = np.empty((iterations - burn_in, L, L))
    for it in range(iterations):
        for l in range(L):
            state.groups[l] = gibbs_iteration(state.groups[l], work[l], hyper, rng,
                                              restrict=restrict, estimate_alpha=estimate_alpha,
                                              factor_prior_mean=state.mu[l])
            if latent:
                upd = probit_latent_update if mode == "probit" else copula_latent_update
                kw = {} if mode == "probit" else {"codes": codes[l]}
                Z[l] = upd(Z[l], data[l], state.groups[l], rng, **kw)
                work[l] = Z[l].Z
        state.mu = update_mu(state, rng)
        if estimate_alpha:
            state.mu = shift_group_location(state, hyper, rng)
        state.Kmu = update_Kmu(state, rng)
        if check_invariants:
            check_multigroup(state, restrict)
            if latent:
                for z, d in zip(Z, data):
                    check_latent(z, d, mode)
        if it >= burn_in:
            k = it - burn_in
            for rec, g in zip(recs, state.groups):
                rec.add(it, g)
            mu_rec[k] = state.mu
            Kmu_rec[k] = state.Kmu
    traces = [r.trace() for r in recs]
    if align:
        mu_rec = _align_signs(traces, mu_rec)
    return MultiGroupTrace(traces, mu_rec, Kmu_rec)
