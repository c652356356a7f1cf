from functools import lru_cache

import numpy as np
import pytest
from scipy import stats
from scipy.linalg import solve_triangular

from singlefactor.errors import EmptyTrace, InvariantViolation
from singlefactor.graphs import GraphPrior, UndirectedGraph, all_graphs, is_identifiable
from singlefactor.gwishart import (GWishartParams, log_norm_const_decomposable,
                                   sample_gwishart_exact)
from singlefactor.numerics import make_rng, sample_inverse_gamma
from singlefactor.sfgm import (Hyperparams, SFGMState, Trace, bayes_factor_loading,
                               check_state, evidence_label, fit_sfgm, gibbs_iteration,
                               idcbf_sweep, log_joint_density, posterior_summaries,
                               update_alpha, update_delta, update_factors, update_lambda)
from singlefactor.simulation import builtin_model, simulate

from .oracles import gaussian_from_logdensity, ks_against_cdf, ks_against_grid

N_DRAWS = 50000
HYPER = Hyperparams()


def _state(p=3, seed=0):
    rng = make_rng(seed)
    K = np.array([[2.0, 0.6, 0.0], [0.6, 1.5, -0.4], [0.0, -0.4, 1.0]])[:p, :p]
    adj = K != 0
    np.fill_diagonal(adj, False)
    X = rng.standard_normal((6, p)) + 0.5
    state = SFGMState(0.3 * rng.standard_normal(p), np.linspace(0.6, 1.2, p),
                      rng.standard_normal(6), K, UndirectedGraph(adj), 0.8)
    return state, X


def _replace(state, **kw):
    s = state.copy()
    for k, v in kw.items():
        setattr(s, k, v)
    return s


# ---------------------------------------------------------------------------
# slice oracles: the reference is the joint density, never the update formula

def test_factor_slice_oracle():
    state, X = _state()
    rng = make_rng(1)
    draws = np.array([update_factors(state, X, rng)[0] for _ in range(N_DRAWS)])

    def logpdf(t):
        f = state.f.copy()
        f[0] = t
        return log_joint_density(_replace(state, f=f), X, HYPER)

    assert ks_against_grid(draws, logpdf, -6, 6) < 0.02


def _alternative_factor_draws(state, X, rng, size):
    # the alternative form, built on lam' K^{-1} lam / lam' lam
    lam = state.lam
    r = lam @ np.linalg.solve(state.K, lam) / (lam @ lam)
    denom = lam @ lam + r
    mean = lam @ (X[0] - state.alpha) / denom
    return mean + np.sqrt(r / denom) * rng.standard_normal(size)


def test_factor_conditional_rejects_alternative_form():
    state, X = _state()

    def logpdf(t):
        f = state.f.copy()
        f[0] = t
        return log_joint_density(_replace(state, f=f), X, HYPER)

    alt = _alternative_factor_draws(state, X, make_rng(2), N_DRAWS)
    assert ks_against_grid(alt, logpdf, -6, 6) > 0.05


def test_alpha_slice_oracle_one_dimensional():
    state, X = _state(p=1)
    rng = make_rng(3)
    draws = np.array([update_alpha(state, X, HYPER, rng)[0] for _ in range(N_DRAWS)])
    logpdf = lambda t: log_joint_density(_replace(state, alpha=np.array([t])), X, HYPER)
    assert ks_against_grid(draws, logpdf, -5, 5) < 0.02


def _gaussian_block_check(draw, logpdf, x0):
    mean, cov = gaussian_from_logdensity(logpdf, x0)
    draws = np.array([draw() for _ in range(N_DRAWS)])
    se = np.sqrt(np.diag(cov) / N_DRAWS)
    assert np.all(np.abs(draws.mean(0) - mean) < 4.5 * se)
    assert np.allclose(np.cov(draws.T), cov, rtol=0.05, atol=0.02 * np.abs(cov).max())
    for v in range(x0.size):
        ks = ks_against_cdf(draws[:, v], stats.norm(mean[v], np.sqrt(cov[v, v])).cdf)
        assert ks < 0.02


def test_alpha_block_matches_joint_density():
    state, X = _state()
    rng = make_rng(4)
    _gaussian_block_check(lambda: update_alpha(state, X, HYPER, rng),
                          lambda a: log_joint_density(_replace(state, alpha=a), X, HYPER),
                          state.alpha)


def test_lambda_slice_oracle_one_dimensional():
    state, X = _state(p=1)
    rng = make_rng(5)
    draws = np.array([update_lambda(state, X, rng)[0] for _ in range(N_DRAWS)])
    logpdf = lambda t: log_joint_density(_replace(state, lam=np.array([t])), X, HYPER)
    assert ks_against_grid(draws, logpdf, -6, 6) < 0.02


def test_lambda_block_matches_joint_density():
    state, X = _state()
    rng = make_rng(6)
    _gaussian_block_check(lambda: update_lambda(state, X, rng),
                          lambda l: log_joint_density(_replace(state, lam=l), X, HYPER),
                          state.lam)


def test_lambda_conditional_rejects_alternative_form():
    # mean premultiplied by K^{-1} instead of the conjugate form
    state, X = _state()
    rng = make_rng(7)
    s = 1.0 / state.Delta + state.f @ state.f
    alt_mean = np.linalg.solve(state.K, state.f @ (X - state.alpha)) / s
    mean, _ = gaussian_from_logdensity(
        lambda l: log_joint_density(_replace(state, lam=l), X, HYPER), state.lam)
    draws = np.array([update_lambda(state, X, rng) for _ in range(2000)])
    assert np.abs(alt_mean - mean).max() > 0.1
    assert np.abs(draws.mean(0) - mean).max() < 0.05


def test_delta_slice_oracle():
    state, X = _state()
    rng = make_rng(8)
    draws = np.array([update_delta(state, HYPER, rng) for _ in range(N_DRAWS)])
    logpdf = lambda t: log_joint_density(_replace(state, Delta=t), X, HYPER)
    assert ks_against_grid(draws, logpdf, 1e-3, 30, num=60001) < 0.02


# ---------------------------------------------------------------------------
# closed-form examples

def _scalar_state(lam=1.0, K=1.0, alpha=0.0, f=(1.0,), Delta=1.0):
    return SFGMState(np.array([alpha]), np.array([lam]), np.array(f, dtype=float),
                     np.array([[K]]), UndirectedGraph.empty(1), Delta)


def test_factor_examples():
    rng = make_rng(9)
    x = np.array([[2.0]])
    draws = np.array([update_factors(_scalar_state(), x, rng)[0] for _ in range(N_DRAWS)])
    assert ks_against_cdf(draws, stats.norm(1.0, np.sqrt(0.5)).cdf) < 0.02
    state, X = _state()
    prior = np.concatenate([update_factors(_replace(state, lam=np.zeros(3)), X, rng)
                            for _ in range(N_DRAWS // 6)])
    assert ks_against_cdf(prior, stats.norm().cdf) < 0.02


def test_alpha_examples():
    rng = make_rng(10)
    X = np.array([[1.0, 2.0, 0.0], [3.0, 0.0, 1.0]])
    state = SFGMState(np.zeros(3), np.zeros(3), np.zeros(2), np.eye(3),
                      UndirectedGraph.empty(3), 1.0)
    draws = np.array([update_alpha(state, X, HYPER, rng) for _ in range(N_DRAWS)])
    prec = 2 + HYPER.n0
    for v in range(3):
        ref = stats.norm(X[:, v].sum() / prec, 1 / np.sqrt(prec))
        assert ks_against_cdf(draws[:, v], ref.cdf) < 0.02
    tight = Hyperparams(n0=1e8)
    assert np.linalg.norm(update_alpha(state, X, tight, rng)) < 1e-3


def test_lambda_examples():
    rng = make_rng(11)
    draws = np.array([update_lambda(_scalar_state(), np.array([[2.0]]), rng)[0]
                      for _ in range(N_DRAWS)])
    assert ks_against_cdf(draws, stats.norm(1.0, np.sqrt(0.5)).cdf) < 0.02
    # no factor information: the prior N(0, Delta K^{-1})
    s = _scalar_state(K=2.0, f=(0.0, 0.0), Delta=0.5)
    draws = np.array([update_lambda(s, np.ones((2, 1)), rng)[0] for _ in range(N_DRAWS)])
    assert ks_against_cdf(draws, stats.norm(0, np.sqrt(0.25)).cdf) < 0.02


def test_delta_examples():
    rng = make_rng(12)
    state = SFGMState(np.zeros(5), np.zeros(5), np.zeros(1), np.eye(5),
                      UndirectedGraph.empty(5), 1.0)
    # IG(c + p/2, (c d + lam' K lam) / 2) with c=2, d=1, p=5: shape 4.5 and
    # rate 1 (lam = 0) or 1.5 (lam' K lam = 1); the mean is rate / 3.5
    d = np.array([update_delta(state, HYPER, rng) for _ in range(N_DRAWS)])
    assert np.all(d > 0)
    assert abs(d.mean() - 2 / 7) < 0.01
    assert ks_against_cdf(d, stats.invgamma(4.5, scale=1.0).cdf) < 0.02
    state.lam = np.array([1.0, 0, 0, 0, 0])
    d = np.array([update_delta(state, HYPER, rng) for _ in range(N_DRAWS)])
    assert abs(d.mean() - 3 / 7) < 0.01


# ---------------------------------------------------------------------------
# graph / precision block

def _enumerated_pip(X, p, restrict):
    S = X.T @ X
    n = X.shape[0]
    lp = GraphPrior(p).log_prior_by_size()
    logs, graphs = [], []
    for G in all_graphs(p):
        if restrict and not is_identifiable(G):
            continue
        logs.append(lp[G.size()]
                    + log_norm_const_decomposable(GWishartParams(3 + n, np.eye(p) + S, G))
                    - log_norm_const_decomposable(GWishartParams(3, np.eye(p), G)))
        graphs.append(G)
    w = np.exp(np.array(logs) - max(logs))
    w /= w.sum()
    return sum(wi * G.adj for wi, G in zip(w, graphs))


def _sweep_pip(X, p, restrict, sweeps, seed):
    rng = make_rng(seed)
    state = SFGMState(np.zeros(p), np.zeros(p), np.zeros(X.shape[0]), np.eye(p),
                      UndirectedGraph.empty(p), 1.0)
    total = np.zeros((p, p))
    for _ in range(sweeps):
        state.G, state.K, _ = idcbf_sweep(state, X, HYPER, rng, restrict=restrict)
        check_state(state, restrict)
        total += state.G.adj
    return total / sweeps


def _oracle_data(p, seed):
    K = np.eye(p)
    K[0, 1] = K[1, 0] = 0.4
    if p > 3:
        K[2, 3] = K[3, 2] = -0.3
    return make_rng(seed).multivariate_normal(np.zeros(p), np.linalg.inv(K), size=30)


def test_edge_sweep_matches_enumeration_p4_identifiable():
    X = _oracle_data(4, 3)
    assert np.abs(_sweep_pip(X, 4, True, 20000, 1) - _enumerated_pip(X, 4, True)).max() < 0.02


def test_edge_sweep_prior_only_matches_restricted_prior():
    # no data: the sweep must reproduce the size prior restricted to identifiable graphs
    X = np.zeros((0, 5))
    pip = _sweep_pip(X, 5, True, 20000, 2)
    lp = GraphPrior(5).log_prior_by_size()
    graphs = [G for G in all_graphs(5) if is_identifiable(G)]
    w = np.exp([lp[G.size()] for G in graphs])
    w /= w.sum()
    assert np.abs(pip - sum(wi * G.adj for wi, G in zip(w, graphs))).max() < 0.02


def test_non_identifiable_flips_are_skipped():
    # for p = 3 only the empty graph is identifiable
    X = _oracle_data(3, 4)
    assert np.all(_sweep_pip(X, 3, True, 200, 5) == 0)


def test_clamped_graph_block_keeps_graph_and_precision():
    state, X = _state()
    out = gibbs_iteration(state, X, HYPER, make_rng(13), restrict=False, update_graph=False)
    assert out.G == state.G
    assert np.array_equal(out.K, state.K)


def test_invariants_hold_and_fit_is_reproducible():
    m = builtin_model("M1")
    X = simulate(m, 200, make_rng(14))
    a = fit_sfgm(X, iterations=300, burn_in=100, seed=3, check_invariants=True)
    b = fit_sfgm(X, iterations=300, burn_in=100, seed=3)
    assert len(a) == 200
    for name in ("alpha", "lam", "Delta", "adj", "K"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert all(is_identifiable(UndirectedGraph(A)) for A in a.adj)


@lru_cache(maxsize=None)
def _restricted_prior(p):
    graphs = [G for G in all_graphs(p) if is_identifiable(G)]
    lp = GraphPrior(p).log_prior_by_size()
    w = np.exp([lp[G.size()] for G in graphs])
    return graphs, w / w.sum()


def _prior_state(p, n, rng):
    graphs, w = _restricted_prior(p)
    G = graphs[rng.choice(len(graphs), p=w)]
    K = sample_gwishart_exact(GWishartParams(HYPER.delta, np.eye(p), G), rng)
    Delta = float(sample_inverse_gamma(HYPER.c, HYPER.c * HYPER.d / 2, rng))
    lam = solve_triangular(np.linalg.cholesky(K).T, rng.standard_normal(p)) * np.sqrt(Delta)
    alpha = rng.standard_normal(p) / np.sqrt(HYPER.n0)
    return SFGMState(alpha, lam, rng.standard_normal(n), K, G, Delta)


def _data_given(state, rng):
    n, p = state.f.shape[0], state.p
    e = solve_triangular(np.linalg.cholesky(state.K).T, rng.standard_normal((p, n))).T
    return state.alpha + np.outer(state.f, state.lam) + e


def _summaries(s):
    return [s.G.size(), np.log(s.K[0, 0]), np.log(s.Delta), float(s.G.adj[0, 1]),
            float(abs(s.lam[1]) > 0.5)]


def test_joint_distribution_geweke():
    # alternating full Gibbs scans with fresh data draws leaves the prior invariant,
    # so chain marginals must match independent prior draws
    p, n, N, thin = 5, 3, 8000, 5
    rng = make_rng(15)
    A = np.array([_summaries(_prior_state(p, n, rng)) for _ in range(N)])
    s = _prior_state(p, n, rng)
    B = []
    for t in range(N * thin):
        s = gibbs_iteration(s, _data_given(s, rng), HYPER, rng)
        if t % thin == 0:
            B.append(_summaries(s))
    B = np.array(B)
    batches = B.reshape(40, -1, B.shape[1]).mean(1)
    se = np.sqrt(A.var(0) / N + batches.var(0, ddof=1) / 40)
    assert np.all(np.abs(A.mean(0) - B.mean(0)) < 4 * se), (A.mean(0), B.mean(0), se)


def test_check_state_rejects_bad_states():
    state, _ = _state()
    with pytest.raises(InvariantViolation):
        check_state(state)  # the (1,2)-(2,3) path has a bipartite complement
    state.G = UndirectedGraph.empty(3)
    with pytest.raises(InvariantViolation):
        check_state(state)  # K has entries off the empty graph


# ---------------------------------------------------------------------------
# summaries

def _trace_from_lam(lam, adj=None):
    T, p = lam.shape
    adj = np.zeros((T, p, p), dtype=bool) if adj is None else adj
    K = np.broadcast_to(np.eye(p), (T, p, p)).copy()
    return Trace(np.zeros((T, p)), lam, np.ones(T), adj, K, np.zeros(T, dtype=np.int64),
                 np.arange(T))


@pytest.mark.parametrize("above,below,expected", [(500, 500, 1.0), (800, 200, 4.0),
                                                    (1000, 0, 2001.0)])
def test_bayes_factor_examples(above, below, expected):
    lam = np.concatenate([np.full(above, 0.5), np.full(below, 0.001)])[:, None]
    bf = bayes_factor_loading(_trace_from_lam(lam), 1)
    assert np.isclose(bf.value, expected)


def test_evidence_labels_and_empty_trace():
    assert evidence_label(150) == "Decisive"
    assert evidence_label(20) == "Strong"
    assert evidence_label(4) == "Substantial"
    assert evidence_label(0.5) == "Negative"
    with pytest.raises(EmptyTrace):
        bayes_factor_loading(_trace_from_lam(np.zeros((0, 2))), 1)


def test_posterior_summaries_examples():
    T = 10
    adj = np.zeros((T, 3, 3), dtype=bool)
    adj[:6, 0, 1] = adj[:6, 1, 0] = True
    s = posterior_summaries(_trace_from_lam(np.ones((T, 3)), adj))
    assert np.isclose(s["pip"][0, 1], 0.6)
    assert s["median_graph"].edges == [(1, 2)]
    assert np.all(s["lambda"]["lower"] == s["lambda"]["upper"])
    assert np.allclose(s["expected_edges"][0], np.cumsum([1] * 6 + [0] * 4) / np.arange(1, 11))
