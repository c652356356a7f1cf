"""Several datasets linked through their factor means.

Five groups are observed at consecutive time points.  Their factor means
follow an AR(1)-like Gaussian graphical model, encoded by the path graph
1-2-3-4-5 with a G-Wishart prior on its precision.  We simulate data from
that structure and check how well the posterior ranks the group means.

    python3 demos/multigroup_ar.py
"""
import numpy as np

from singlefactor.graphs import build_ar_graph
from singlefactor.multigroup import fit_multigroup
from singlefactor.numerics import make_rng
from singlefactor.simulation import builtin_model, simulate

L, n, rho = 5, 200, 0.9
model = builtin_model("M1")
rng = make_rng(0)

# correlated group means, then f ~ N(mu_l, 1) within group l
C = rho ** np.abs(np.subtract.outer(np.arange(L), np.arange(L)))
mu = np.linalg.cholesky(C) @ rng.standard_normal(L)
data = [simulate(model, n, rng) + model.lam * mu[l] for l in range(L)]

trace = fit_multigroup(data, build_ar_graph(L, 1), iterations=3000, burn_in=1000, seed=1,
                       check_invariants=True)
mu_hat = trace.mu.mean(0)

np.set_printoptions(precision=3, suppress=True)
print("true mu:     ", mu)
print("posterior mu:", mu_hat)
print("correlation: %.3f" % np.corrcoef(mu, mu_hat)[0, 1])
print("\nposterior mean of K_mu (zeros off the path graph):")
print(trace.Kmu.mean(0))
