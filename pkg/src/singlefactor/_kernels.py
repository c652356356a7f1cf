"""Compiled inner loops for the graph/precision samplers.

Every kernel is deterministic given its inputs.  Fixed-size variates are
drawn by the caller from a ``numpy.random.Generator`` and passed in; kernels
that need a random number of variates (accept-reject) take an integer seed
for numba's internal generator, itself drawn from the caller's Generator, so
a chain is reproducible from its seed alone.
"""
import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_REJECTED = 2
# sweeps of the regression completion before switching to Newton
NEWTON_AFTER = 200
NEWTON_MAX_ITER = 200
# squared Newton decrement (twice a bound on the suboptimality) at which
# one full step is taken and the iteration stops; for ill-conditioned Sigma
# the line search cannot resolve much smaller decreases
NEWTON_DECREMENT_TOL = 1e-10
# below this squared decrement the objective (self-concordant) is in its
# quadratic region and full steps are taken without a line search, whose
# test cannot resolve such small decreases in floating point
NEWTON_PURE_TOL = 1e-3
# accepted mismatch of a regression completion before Newton takes over
COMPLETION_CHECK_TOL = 1e-7


@njit(cache=True)
def bartlett_draw(scale_root, chi, z):
    """Wishart draw ``M M^T`` with ``M = scale_root @ A`` (Bartlett factor A).

    ``chi[i]`` must be a chi-square variate with ``nu - i`` degrees of freedom;
    only the strictly lower triangle of ``z`` is read.
    """
    p = scale_root.shape[0]
    A = np.zeros((p, p))
    for i in range(p):
        A[i, i] = np.sqrt(chi[i])
        for j in range(i):
            A[i, j] = z[i, j]
    M = scale_root @ A
    return M @ M.T


@njit(cache=True)
def _chol(A):
    """Lower Cholesky factor and a success flag (no exception on failure)."""
    p = A.shape[0]
    L = np.zeros((p, p))
    for j in range(p):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, p):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@njit(cache=True)
def _free_pairs(adj):
    p = adj.shape[0]
    m = p
    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                m += 1
    ia = np.empty(m, dtype=np.int64)
    ib = np.empty(m, dtype=np.int64)
    for i in range(p):
        ia[i] = i
        ib[i] = i
    c = p
    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                ia[c] = i
                ib[c] = j
                c += 1
    return ia, ib


@njit(cache=True)
def newton_completion(Sigma, adj, max_iter):
    """K in M+(G) with (K^{-1})_{vw} = Sigma_{vw} on the diagonal and edges.

    Damped Newton on the convex objective ``tr(K Sigma) - logdet K`` over
    the free entries of K.  The iteration is affine invariant, so its speed
    does not depend on the conditioning of Sigma.
    """
    p = Sigma.shape[0]
    ia, ib = _free_pairs(adj)
    m = ia.shape[0]
    K = np.zeros((p, p))
    for i in range(p):
        K[i, i] = 1.0 / Sigma[i, i]
    L, ok = _chol(K)
    obj = 0.0
    for i in range(p):
        obj += K[i, i] * Sigma[i, i] - 2.0 * np.log(L[i, i])
    for it in range(max_iter):
        W = np.linalg.inv(K)
        g = np.empty(m)
        H = np.empty((m, m))
        for k in range(m):
            a = ia[k]
            b = ib[k]
            sk = 0.5 if a == b else 1.0
            g[k] = sk * 2.0 * (Sigma[a, b] - W[a, b])
            for l in range(k, m):
                c = ia[l]
                d = ib[l]
                sl = 0.5 if c == d else 1.0
                h = sk * sl * 2.0 * (W[a, d] * W[b, c] + W[a, c] * W[b, d])
                H[k, l] = h
                H[l, k] = h
        step = -np.linalg.solve(H, g)
        dec = -np.dot(g, step)
        if dec < NEWTON_DECREMENT_TOL:
            # inside the quadratic region: one full step is already exact to
            # working precision
            for k in range(m):
                a = ia[k]
                b = ib[k]
                K[a, b] += step[k]
                if a != b:
                    K[b, a] += step[k]
            return K, STATUS_OK
        if dec < NEWTON_PURE_TOL:
            Kn = K.copy()
            for k in range(m):
                a = ia[k]
                b = ib[k]
                Kn[a, b] += step[k]
                if a != b:
                    Kn[b, a] += step[k]
            Ln, ok = _chol(Kn)
            if ok:
                K = Kn
                obj = 0.0
                for i in range(p):
                    obj -= 2.0 * np.log(Ln[i, i])
                    for j in range(p):
                        obj += Kn[i, j] * Sigma[j, i]
                continue
        t = 1.0
        while True:
            Kn = K.copy()
            for k in range(m):
                a = ia[k]
                b = ib[k]
                Kn[a, b] += t * step[k]
                if a != b:
                    Kn[b, a] += t * step[k]
            Ln, ok = _chol(Kn)
            if ok:
                new = 0.0
                for i in range(p):
                    new -= 2.0 * np.log(Ln[i, i])
                    for j in range(p):
                        new += Kn[i, j] * Sigma[j, i]
                if new <= obj - 0.25 * t * dec:
                    break
            t *= 0.5
            if t < 1e-14:
                return K, STATUS_NO_CONVERGENCE
        K = Kn
        obj = new
    return K, STATUS_NO_CONVERGENCE


@njit(cache=True)
def complete_covariance(Sigma, adj, tol, max_sweeps):
    """Iterative completion used by the direct G-Wishart sampler.

    Returns the precision matrix in M+(G) (non-edges set to exactly zero)
    and a status flag.  When the neighbourhood-regression sweeps have not
    converged after ``min(max_sweeps, NEWTON_AFTER)`` passes, or their
    result is not positive definite, the same completion is computed by
    Newton's method.
    """
    p = Sigma.shape[0]
    W = Sigma.copy()
    nbrs = np.zeros((p, p), dtype=np.int64)
    nnb = np.zeros(p, dtype=np.int64)
    for j in range(p):
        c = 0
        for i in range(p):
            if i != j and adj[i, j]:
                nbrs[j, c] = i
                c += 1
        nnb[j] = c

    status = STATUS_NO_CONVERGENCE
    for sweep in range(min(max_sweeps, NEWTON_AFTER)):
        maxdiff = 0.0
        for j in range(p):
            k = nnb[j]
            if k == 0:
                for i in range(p):
                    if i != j:
                        d = abs(W[i, j])
                        if d > maxdiff:
                            maxdiff = d
                        W[i, j] = 0.0
                        W[j, i] = 0.0
                continue
            Wn = np.empty((k, k))
            rhs = np.empty(k)
            for a in range(k):
                ia = nbrs[j, a]
                rhs[a] = Sigma[ia, j]
                for b in range(k):
                    Wn[a, b] = W[ia, nbrs[j, b]]
            beta = np.linalg.solve(Wn, rhs)
            for i in range(p):
                if i == j:
                    continue
                s = 0.0
                for a in range(k):
                    s += W[i, nbrs[j, a]] * beta[a]
                d = abs(s - W[i, j])
                if d > maxdiff:
                    maxdiff = d
                W[i, j] = s
                W[j, i] = s
        scale = 0.0
        for i in range(p):
            if W[i, i] > scale:
                scale = W[i, i]
        if maxdiff <= tol * scale:
            status = STATUS_OK
            break

    if status == STATUS_OK:
        K = _zero_non_edges(np.linalg.inv(W), adj)
        # for nearly singular Sigma the sweep tolerance, relative to the
        # largest variance, does not control the inversion: the zeroed
        # matrix can leave the cone or miss Sigma on the free entries.
        # Newton is affine invariant and handles both.
        L, ok = _chol(K)
        if ok and _completion_residual(K, Sigma, adj) <= COMPLETION_CHECK_TOL:
            return K, status
    K, status = newton_completion(Sigma, adj, NEWTON_MAX_ITER)
    return _zero_non_edges(K, adj), status


@njit(cache=True)
def _completion_residual(K, Sigma, adj):
    # largest mismatch between K^{-1} and Sigma on the diagonal and edges,
    # each entry scaled by sqrt(Sigma_ii Sigma_jj)
    W = np.linalg.inv(K)
    p = K.shape[0]
    r = 0.0
    for i in range(p):
        for j in range(i, p):
            if i == j or adj[i, j]:
                d = abs(W[i, j] - Sigma[i, j]) / np.sqrt(Sigma[i, i] * Sigma[j, j])
                if d > r:
                    r = d
    return r


@njit(cache=True)
def _zero_non_edges(K, adj):
    p = K.shape[0]
    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                v = 0.5 * (K[i, j] + K[j, i])
                K[i, j] = v
                K[j, i] = v
            else:
                K[i, j] = 0.0
                K[j, i] = 0.0
    return K


@njit(cache=True)
def gwishart_direct(scale_root, chi, z, adj, tol, max_sweeps):
    K0 = bartlett_draw(scale_root, chi, z)
    Sigma = np.linalg.inv(K0)
    Sigma = 0.5 * (Sigma + Sigma.T)
    return complete_covariance(Sigma, adj, tol, max_sweeps)


@njit(cache=True)
def mcs_order(adj):
    """Maximum cardinality search visit order (ties to the lowest index)."""
    p = adj.shape[0]
    weight = np.zeros(p, dtype=np.int64)
    done = np.zeros(p, dtype=np.bool_)
    order = np.empty(p, dtype=np.int64)
    for k in range(p):
        best = -1
        for v in range(p):
            if not done[v] and (best < 0 or weight[v] > weight[best]):
                best = v
        order[k] = best
        done[best] = True
        for w in range(p):
            if adj[best, w] and not done[w]:
                weight[w] += 1
    return order


@njit(cache=True)
def _exact_proposal(T, adj, delta):
    """Upper factor Phi of a candidate K = Phi' Phi and its log acceptance.

    With ``D^{-1} = T' T`` (T upper triangular) and ``Psi = Phi T^{-1}``, the
    free entries of Psi are independent: ``psi_ii^2 ~ chi2(delta + nu_i)``
    with ``nu_i`` the number of later neighbours of i, and ``psi_ij ~ N(0, 1)``
    on edges.  The entries on non-edges are fixed by ``K_ij = 0``; the
    G-Wishart density is proportional to the proposal density times
    ``exp(-sum psi_ij^2 / 2)`` over those entries, which is at most one.
    """
    p = T.shape[0]
    Psi = np.zeros((p, p))
    Phi = np.zeros((p, p))
    logw = 0.0
    for i in range(p):
        nu = 0
        for j in range(i + 1, p):
            if adj[i, j]:
                nu += 1
        Psi[i, i] = np.sqrt(np.random.chisquare(delta + nu))
        Phi[i, i] = Psi[i, i] * T[i, i]
        for j in range(i + 1, p):
            if adj[i, j]:
                Psi[i, j] = np.random.standard_normal()
                s = 0.0
                for l in range(i, j + 1):
                    s += Psi[i, l] * T[l, j]
                Phi[i, j] = s
            else:
                s = 0.0
                for k in range(i):
                    s += Phi[k, i] * Phi[k, j]
                Phi[i, j] = -s / Phi[i, i]
                s = Phi[i, j]
                for l in range(i, j):
                    s -= Psi[i, l] * T[l, j]
                Psi[i, j] = s / T[j, j]
                logw -= 0.5 * Psi[i, j] * Psi[i, j]
    return Phi, logw


@njit(cache=True)
def _exact_draw(D, adj, delta, max_attempts):
    # vertices are relabelled in reversed search order, which keeps few
    # non-free entries in the upper factor and so a high acceptance rate
    p = D.shape[0]
    perm = mcs_order(adj)[::-1].copy()
    Dp = np.empty((p, p))
    ap = np.empty((p, p), dtype=np.bool_)
    for r in range(p):
        for c in range(p):
            Dp[r, c] = D[perm[r], perm[c]]
            ap[r, c] = adj[perm[r], perm[c]]
    T = np.linalg.cholesky(np.linalg.inv(Dp)).T.copy()
    for attempt in range(max_attempts):
        Phi, logw = _exact_proposal(T, ap, delta)
        if np.log(np.random.random()) < logw:
            Kp = Phi.T @ Phi
            K = np.empty((p, p))
            for r in range(p):
                for c in range(p):
                    K[perm[r], perm[c]] = Kp[r, c]
            return _zero_non_edges(K, adj), STATUS_OK
    return np.zeros((p, p)), STATUS_REJECTED


@njit(cache=True)
def gwishart_exact(D, adj, delta, max_attempts, seed):
    """Independent draw from W_G(delta, D) by accept-reject.

    Returns ``(K, status)``; the status is ``STATUS_REJECTED`` when no
    proposal was accepted within ``max_attempts``.
    """
    np.random.seed(seed)
    return _exact_draw(D, adj, delta, max_attempts)


@njit(cache=True)
def _column_update(K, adj, D, delta, j):
    # c = k_jj - k_N' A k_N with A = (K_{-j}^{-1})_{NN} is independent of
    # k_N given K_{-j}: c ~ chi2(delta) / D_jj and
    # k_N ~ N(-(D_jj A)^{-1} D_Nj, (D_jj A)^{-1})
    p = K.shape[0]
    nb = np.empty(p, dtype=np.int64)
    k = 0
    for i in range(p):
        if i != j and adj[i, j]:
            nb[k] = i
            k += 1
    S = np.linalg.inv(K)
    djj = D[j, j]
    c = np.random.chisquare(delta) / djj
    for i in range(p):
        if i != j:
            K[i, j] = 0.0
            K[j, i] = 0.0
    if k == 0:
        K[j, j] = c
        return
    # (K_{-j}^{-1})_{NN} = S_NN - S_Nj S_jN / S_jj
    A = np.empty((k, k))
    for a in range(k):
        for b in range(k):
            A[a, b] = S[nb[a], nb[b]] - S[nb[a], j] * S[nb[b], j] / S[j, j]
    A = 0.5 * (A + A.T)
    P = djj * A
    L = np.linalg.cholesky(P)
    rhs = np.empty(k)
    for a in range(k):
        rhs[a] = -D[nb[a], j]
    mean = np.linalg.solve(P, rhs)
    zs = np.empty(k)
    for a in range(k):
        zs[a] = np.random.standard_normal()
    # L' x = z gives x ~ N(0, P^{-1})
    kn = mean + np.linalg.solve(L.T.copy(), zs)
    quad = 0.0
    for a in range(k):
        for b in range(k):
            quad += kn[a] * A[a, b] * kn[b]
    for a in range(k):
        K[nb[a], j] = kn[a]
        K[j, nb[a]] = kn[a]
    K[j, j] = c + quad


@njit(cache=True)
def gwishart_gibbs_sweep(K, adj, D, delta, seed):
    """One systematic column sweep leaving W_G(delta, D) invariant.

    Each column (diagonal entry and edge entries) is redrawn from its exact
    conditional given the rest of K, so every step stays in M+(G).
    """
    np.random.seed(seed)
    K = K.copy()
    for j in range(K.shape[0]):
        _column_update(K, adj, D, delta, j)
    return K


@njit(cache=True)
def identifiable(adj):
    """Every connected component of the complement graph is non-bipartite."""
    p = adj.shape[0]
    color = np.full(p, -1, dtype=np.int64)
    queue = np.empty(p, dtype=np.int64)
    for s in range(p):
        if color[s] != -1:
            continue
        color[s] = 0
        head = 0
        tail = 1
        queue[0] = s
        odd = False
        while head < tail:
            u = queue[head]
            head += 1
            for w in range(p):
                if w == u or adj[u, w]:
                    continue
                if color[w] == -1:
                    color[w] = 1 - color[u]
                    queue[tail] = w
                    tail += 1
                elif color[w] == color[u]:
                    odd = True
        if not odd:
            return False
    return True


@njit(cache=True)
def _pair_factor(K, i, j):
    """Cholesky quantities for the pair (i, j) moved to the last two slots.

    Returns ``(a, cross, tail)`` where, for the upper factor Phi of the
    permuted matrix, ``a = Phi[p-2, p-2]``, ``cross`` is the inner product of
    the first p-2 entries of the last two columns and ``tail`` the squared
    norm of the first p-2 entries of the last column.
    """
    p = K.shape[0]
    perm = np.empty(p, dtype=np.int64)
    c = 0
    for v in range(p):
        if v != i and v != j:
            perm[c] = v
            c += 1
    perm[p - 2] = i
    perm[p - 1] = j
    Kp = np.empty((p, p))
    for r in range(p):
        for s in range(p):
            Kp[r, s] = K[perm[r], perm[s]]
    L = np.linalg.cholesky(Kp)
    a = L[p - 2, p - 2]
    cross = 0.0
    tail = 0.0
    for k in range(p - 2):
        cross += L[p - 2, k] * L[p - 1, k]
        tail += L[p - 1, k] * L[p - 1, k]
    return a, cross, tail


@njit(cache=True)
def log_edge_factor(K, D, i, j):
    """Log ratio (edge present / edge absent) of the conditional density of
    the Cholesky coordinates not touched by the pair (i, j), for a G-Wishart
    with rate ``D``.  The normalising constants are excluded.
    """
    a, cross, _ = _pair_factor(K, i, j)
    djj = D[j, j]
    phi0 = -cross / a
    t = phi0 + a * D[i, j] / djj
    return np.log(a) + 0.5 * np.log(2.0 * np.pi / djj) + 0.5 * djj * t * t


@njit(cache=True)
def idcbf_sweep_kernel(K, adj, D, Dpost, delta, log_prior_size, restrict,
                       u, chi_post, z_post, max_attempts, seed):
    """One pass of single-edge exchange moves over all vertex pairs.

    ``K`` and ``adj`` are copied, updated pair by pair and returned together
    with the number of accepted flips and a status flag.  The auxiliary
    prior draws use numba's generator seeded with ``seed``.
    """
    np.random.seed(seed)
    p = K.shape[0]
    K = K.copy()
    adj = adj.copy()
    size = 0
    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                size += 1
    n_accept = 0
    e = 0
    for i in range(p):
        for j in range(i + 1, p):
            present = adj[i, j]
            adj[i, j] = not present
            adj[j, i] = not present
            allowed = True
            if restrict:
                allowed = identifiable(adj)
            if allowed:
                K0, status = _exact_draw(D, adj, delta, max_attempts)
                if status != STATUS_OK:
                    adj[i, j] = present
                    adj[j, i] = present
                    return K, adj, n_accept, status
                r_post = log_edge_factor(K, Dpost, i, j)
                r_prior = log_edge_factor(K0, D, i, j)
                if present:
                    log_alpha = (log_prior_size[size - 1] - log_prior_size[size]
                                 - r_post + r_prior)
                else:
                    log_alpha = (log_prior_size[size + 1] - log_prior_size[size]
                                 + r_post - r_prior)
                if np.log(u[e]) < log_alpha:
                    n_accept += 1
                    if present:
                        size -= 1
                    else:
                        size += 1
                    present = not present
            adj[i, j] = present
            adj[j, i] = present

            # refresh the two Cholesky coordinates owned by this pair
            a, cross, tail = _pair_factor(K, i, j)
            djj = Dpost[j, j]
            phi_jj = np.sqrt(chi_post[e] / djj)
            if present:
                phi_ij = -a * Dpost[i, j] / djj + z_post[e] / np.sqrt(djj)
                kij = cross + a * phi_ij
            else:
                phi_ij = -cross / a
                kij = 0.0
            K[i, j] = kij
            K[j, i] = kij
            K[j, j] = tail + phi_ij * phi_ij + phi_jj * phi_jj
            e += 1
    return K, adj, n_accept, STATUS_OK
