"""Independent reference computations shared by the tests."""
import numpy as np
from scipy.integrate import cumulative_trapezoid


def grid_cdf(logpdf, lo, hi, num=20001):
    """Normalised CDF of an unnormalised 1-D log density by quadrature."""
    x = np.linspace(lo, hi, num)
    lp = np.array([logpdf(t) for t in x])
    w = np.exp(lp - lp.max())
    c = cumulative_trapezoid(w, x, initial=0.0)
    return x, c / c[-1]


def ks_against_grid(samples, logpdf, lo, hi, num=20001):
    """Kolmogorov-Smirnov distance between samples and a quadrature CDF."""
    x, F = grid_cdf(logpdf, lo, hi, num)
    s = np.sort(np.asarray(samples, dtype=float))
    Fs = np.interp(s, x, F)
    n = s.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(max(np.max(ecdf_hi - Fs), np.max(Fs - ecdf_lo)))


def ks_against_cdf(samples, cdf):
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    F = cdf(s)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))


def gaussian_from_logdensity(logpdf, x0, h=1e-3):
    """Mean and covariance of a Gaussian log density by central differences."""
    x0 = np.asarray(x0, dtype=float)
    p = x0.size
    H = np.zeros((p, p))
    g = np.zeros(p)
    E = np.eye(p) * h
    f0 = logpdf(x0)
    for a in range(p):
        g[a] = (logpdf(x0 + E[a]) - logpdf(x0 - E[a])) / (2 * h)
        for b in range(p):
            H[a, b] = (logpdf(x0 + E[a] + E[b]) - logpdf(x0 + E[a] - E[b])
                       - logpdf(x0 - E[a] + E[b]) + logpdf(x0 - E[a] - E[b])) / (4 * h * h)
    del f0
    P = -0.5 * (H + H.T)
    cov = np.linalg.inv(P)
    return x0 + cov @ g, cov


def odd_cycle_bruteforce(adj):
    """True iff the graph contains a simple cycle of odd length, by trying
    every ordered vertex sequence of odd length >= 3."""
    from itertools import permutations
    p = adj.shape[0]
    for k in range(3, p + 1, 2):
        for seq in permutations(range(p), k):
            if seq[0] != min(seq):
                continue
            if all(adj[seq[i], seq[(i + 1) % k]] for i in range(k)):
                return True
    return False


def components(adj):
    p = adj.shape[0]
    seen = [False] * p
    out = []
    for s in range(p):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in range(p):
                if adj[u, w] and not seen[w]:
                    seen[w] = True
                    stack.append(w)
        out.append(sorted(comp))
    return out
