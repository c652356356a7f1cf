"""Dense SPD linear algebra and random-variate primitives.

Conventions
-----------
The Wishart family is written with a *rate* matrix ``D`` and degrees of
freedom ``delta``::

    p(K) ∝ det(K)^{(delta - 2) / 2} exp(-tr(K D) / 2)

which is the textbook Wishart with ``nu = delta + p - 1`` degrees of freedom
and scale matrix ``D^{-1}``.  The inverse gamma ``IG(shape, rate)`` is the law
of ``1 / X`` with ``X ~ Gamma(shape, rate)``.
"""
import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

from ._kernels import bartlett_draw
from .errors import (EmptyInterval, InvalidDegreesOfFreedom, InvalidParameter,
                     NotPositiveDefinite)

__all__ = [
    "make_rng",
    "cholesky",
    "is_spd",
    "spd_logdet",
    "spd_solve",
    "spd_inverse",
    "wishart_scale_root",
    "bartlett_variates",
    "sample_wishart",
    "sample_truncated_normal",
    "sample_inverse_gamma",
]

_TAIL = 4.0


def make_rng(seed, stream=0):
    """Generator for the pair ``(seed, stream)``.

    Equal pairs give bitwise-identical variate sequences; distinct streams of
    one seed are statistically independent (``SeedSequence`` spawn keys).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def cholesky(A):
    """Lower Cholesky factor ``L`` with ``L @ L.T == A``.

    Raises
    ------
    NotPositiveDefinite
        If ``A`` is not symmetric positive definite.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotPositiveDefinite("expected a square matrix, got shape %s" % (A.shape,))
    scale = max(np.abs(A).max(), 1.0)
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * scale):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def is_spd(A):
    try:
        cholesky(A)
    except NotPositiveDefinite:
        return False
    return True


def spd_logdet(A):
    L = cholesky(A)
    return 2.0 * np.log(np.diag(L)).sum()


def spd_solve(A, b):
    L = cholesky(A)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def spd_inverse(A):
    A = np.asarray(A, dtype=float)
    inv = spd_solve(A, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def wishart_scale_root(D):
    """Square root ``U`` of ``D^{-1}`` (``U @ U.T == D^{-1}``), no inversion of D."""
    L = cholesky(D)
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return np.ascontiguousarray(Linv.T)


def bartlett_variates(delta, p, rng, size=None):
    """Chi-square and normal variates feeding one (or ``size``) Bartlett draws."""
    nu = delta + p - 1.0
    dfs = nu - np.arange(p)
    shape = (p,) if size is None else (size, p)
    chi = rng.chisquare(dfs, size=shape)
    z = rng.standard_normal(shape + (p,))
    return chi, z


def _check_delta(delta):
    if not delta > 2:
        raise InvalidDegreesOfFreedom("degrees of freedom must exceed 2, got %r" % (delta,))


def sample_wishart(delta, D, rng):
    """Draw from the density ∝ det(K)^{(delta-2)/2} exp(-tr(K D)/2)."""
    _check_delta(delta)
    D = np.atleast_2d(np.asarray(D, dtype=float))
    root = wishart_scale_root(D)
    chi, z = bartlett_variates(delta, D.shape[0], rng)
    K = bartlett_draw(root, chi, z)
    return 0.5 * (K + K.T)


def _std_trunc_inverse_cdf(a, b, u):
    # caller guarantees a + b <= 0, so both CDF values are computed in the
    # accurate (lower) tail
    Fa = ndtr(a)
    Fb = ndtr(b)
    x = ndtri(Fa + u * (Fb - Fa))
    return x


def _std_trunc_upper_tail(a, b, rng):
    """Rejection sampler for the standard normal on (a, b) with a >= 4."""
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        aa = a[pending]
        bb = b[pending]
        width = bb - aa
        narrow = width < 1.0 / aa
        u = rng.random(aa.size)
        v = rng.random(aa.size)
        z = np.empty_like(aa)
        ok = np.empty(aa.size, dtype=bool)
        # uniform proposal for narrow intervals
        if narrow.any():
            zn = aa[narrow] + width[narrow] * u[narrow]
            z[narrow] = zn
            ok[narrow] = np.log(v[narrow]) <= 0.5 * (aa[narrow] ** 2 - zn ** 2)
        wide = ~narrow
        if wide.any():
            aw = aa[wide]
            rate = 0.5 * (aw + np.sqrt(aw * aw + 4.0))
            zw = aw - np.log1p(-u[wide]) / rate
            z[wide] = zw
            ok[wide] = (zw < bb[wide]) & (np.log(v[wide]) <= -0.5 * (zw - rate) ** 2)
        out[pending[ok]] = z[ok]
        pending = pending[~ok]
    return out


def sample_truncated_normal(mean, variance, lower, upper, rng):
    """Normal(mean, variance) restricted to the open interval (lower, upper).

    Inputs broadcast against each other; infinite bounds are allowed.
    Intervals lying more than four standard deviations into a tail use an
    exponential/uniform rejection sampler, everything else inverse-CDF.
    """
    mean, variance, lower, upper = np.broadcast_arrays(
        np.asarray(mean, dtype=float), np.asarray(variance, dtype=float),
        np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    shape = mean.shape
    scalar = mean.ndim == 0
    mean = np.atleast_1d(mean).ravel()
    variance = np.atleast_1d(variance).ravel()
    lower = np.atleast_1d(lower).ravel()
    upper = np.atleast_1d(upper).ravel()
    if np.any(variance <= 0):
        raise InvalidParameter("variance must be positive")
    if np.any(~(lower < upper)):
        raise EmptyInterval("lower bound must be strictly below upper bound")

    sd = np.sqrt(variance)
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    # reflect so that the interval midpoint is non-positive
    with np.errstate(invalid="ignore"):
        # an unbounded interval gives nan, which correctly means no flip
        flip = (a + b) > 0
    a_s = np.where(flip, -b, a)
    b_s = np.where(flip, -a, b)

    x = np.empty_like(a_s)
    tail = b_s <= -_TAIL
    body = ~tail
    if body.any():
        u = rng.random(int(body.sum()))
        xb = _std_trunc_inverse_cdf(a_s[body], b_s[body], u)
        x[body] = np.clip(xb, np.nextafter(a_s[body], np.inf),
                          np.nextafter(b_s[body], -np.inf))
    if tail.any():
        # sample -x from (-b_s, -a_s), which lies beyond +4 sd
        x[tail] = -_std_trunc_upper_tail(-b_s[tail], -a_s[tail], rng)
    x = np.where(flip, -x, x)
    out = mean + sd * x
    out = np.clip(out, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))
    return float(out[0]) if scalar else out.reshape(shape)


def sample_inverse_gamma(shape, rate, rng, size=None):
    """Draw X with 1/X ~ Gamma(shape, rate); mean rate/(shape-1) for shape > 1."""
    if not (np.all(np.asarray(shape) > 0) and np.all(np.asarray(rate) > 0)):
        raise InvalidParameter("shape and rate must be positive")
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)
