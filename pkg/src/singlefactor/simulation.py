"""Synthetic single-factor data and the error metrics of the simulation study."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, NonIdentifiableGraph
from .graphs import UndirectedGraph, is_identifiable
from .numerics import cholesky, make_rng, spd_inverse, spd_logdet

__all__ = [
    "FactorModel",
    "builtin_model",
    "BUILTIN_MODELS",
    "simulate",
    "kl_divergence",
    "estimation_errors",
    "simulation_study",
]


@dataclass(frozen=True)
class FactorModel:
    alpha: np.ndarray
    lam: np.ndarray
    K: np.ndarray
    G: UndirectedGraph
    name: str = "custom"

    def __post_init__(self):
        p = self.G.p
        for name in ("alpha", "lam"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (p,):
                raise DimensionMismatch("%s must have length %d" % (name, p))
            object.__setattr__(self, name, v)
        K = np.asarray(self.K, dtype=float)
        if K.shape != (p, p):
            raise DimensionMismatch("K must be %d x %d" % (p, p))
        cholesky(K)
        off = ~self.G.adj & ~np.eye(p, dtype=bool)
        if np.any(np.abs(K[off]) > 1e-12):
            raise InvalidParameter("K has non-zero entries off the graph")
        if not is_identifiable(self.G):
            raise NonIdentifiableGraph("residual graph %r is not identifiable" % (self.G,))
        object.__setattr__(self, "K", K)

    @property
    def p(self):
        return self.G.p

    def to_dict(self):
        return {"name": self.name, "alpha": self.alpha.tolist(), "lambda": self.lam.tolist(),
                "K": self.K.tolist(), "edges": [list(e) for e in self.G.edges]}

    @classmethod
    def from_dict(cls, d):
        K = np.asarray(d["K"], dtype=float)
        p = K.shape[0]
        if "edges" in d:
            G = UndirectedGraph.from_edges(p, [tuple(e) for e in d["edges"]])
        else:
            G = UndirectedGraph(np.abs(K) > 0)
        return cls(d["alpha"], d["lambda"], K, G, d.get("name", "custom"))


_ALPHA = [0.1, 0.1, 0.1, -0.1, -0.1]
_LAMBDA = [0.8, 1.0, 1.2, 1.2, 0.8]


def _k1():
    K = np.eye(5)
    K[0, 1] = K[1, 0] = 0.5
    K[0, 2] = K[2, 0] = 0.4
    K[1, 2] = K[2, 1] = 0.5
    return K


def _k2():
    K = np.eye(5)
    for (i, j), v in {(0, 1): 0.5, (1, 2): 0.5, (2, 3): 0.5, (3, 4): 0.5, (0, 4): 0.4}.items():
        K[i, j] = K[j, i] = v
    return K


def builtin_model(name):
    """``"M1"``: residual graph on the triangle 1-2-3; ``"M2"``: the 5-cycle."""
    key = name.upper()
    if key == "M1":
        G = UndirectedGraph.from_edges(5, [(1, 2), (1, 3), (2, 3)])
        return FactorModel(_ALPHA, _LAMBDA, _k1(), G, "M1")
    if key == "M2":
        G = UndirectedGraph.from_edges(5, [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)])
        return FactorModel(_ALPHA, _LAMBDA, _k2(), G, "M2")
    raise InvalidParameter("unknown built-in model %r" % (name,))


BUILTIN_MODELS = ("M1", "M2")


def simulate(model, n, rng):
    """n draws of ``alpha + lam f + e`` with f ~ N(0, 1), e ~ N(0, K^{-1})."""
    if n < 1:
        raise InvalidParameter("n must be positive")
    L = cholesky(model.K)
    f = rng.standard_normal(n)
    z = rng.standard_normal((n, model.p))
    # e = L^{-T} z has covariance K^{-1}
    e = np.linalg.solve(L.T, z.T).T
    return model.alpha + np.outer(f, model.lam) + e


def kl_divergence(K_true, K_hat):
    """KL( N(0, K_hat^{-1}) || N(0, K_true^{-1}) ): divergence of the fitted
    residual distribution from the true one.
    """
    K_true = np.asarray(K_true, dtype=float)
    K_hat = np.asarray(K_hat, dtype=float)
    p = K_true.shape[0]
    S_hat = spd_inverse(K_hat)
    return 0.5 * (np.sum(K_true * S_hat) - p - spd_logdet(K_true) + spd_logdet(K_hat))


def estimation_errors(model, alpha_hat, lam_hat, K_hat, pip):
    """Errors of point estimates against the truth.

    ``pip`` is the symmetric matrix of edge inclusion probabilities; the graph
    error is its Frobenius distance to the true adjacency matrix.
    """
    return {
        "alpha": float(np.linalg.norm(np.asarray(alpha_hat) - model.alpha)),
        "lambda": float(np.linalg.norm(np.asarray(lam_hat) - model.lam)),
        "KL": float(kl_divergence(model.K, K_hat)),
        "graph": float(np.linalg.norm(np.asarray(pip) - model.G.adj.astype(float))),
    }


def simulation_study(model, n, replicates=10, iterations=10000, burn_in=5000, seed=0,
                     hyper=None):
    """Fit ``replicates`` simulated datasets and score the posterior means.

    Returns a dict with the per-replicate error records (``"replicates"``),
    their average (``"mean"``) and the errors of the estimates pooled over
    replicates (``"pooled"``: posterior means averaged across datasets before
    scoring).
    """
    from .sfgm import Hyperparams, align_loadings, fit_sfgm

    hyper = hyper or Hyperparams()
    est = []
    for r in range(replicates):
        X = simulate(model, n, make_rng(seed, 2 * r + 1))
        tr = align_loadings(fit_sfgm(X, hyper, iterations, burn_in,
                                     rng=make_rng(seed, 2 * r + 2)))
        est.append((tr.alpha.mean(0), tr.lam.mean(0), tr.K.mean(0), tr.adj.mean(0)))
    per = [estimation_errors(model, *e) for e in est]
    pooled = estimation_errors(model, *(np.mean([e[i] for e in est], axis=0) for i in range(4)))
    mean = {k: float(np.mean([e[k] for e in per])) for k in per[0]}
    return {"replicates": per, "mean": mean, "pooled": pooled}
