# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops of the sampler.

Must stay numerically interchangeable with ``_fallback.py``: same operation
order, same special functions, same pre-drawn uniforms.
"""
from libc.math cimport exp, log, sqrt, INFINITY, M_PI
from scipy.special.cython_special cimport log_ndtr, ndtri_exp

import numpy as np


cdef double _LOG_2PI = log(2.0 * M_PI)


cdef inline double _std_truncnorm(double a, double b, double u) noexcept nogil:
    cdef bint flip = a > 0.0
    cdef double t, la, lb, r, x
    if flip:
        t = a
        a = -b
        b = -t
    la = log_ndtr(a)
    lb = log_ndtr(b)
    r = exp(la - lb)
    x = ndtri_exp(lb + log(r + u * (1.0 - r)))
    if x < a:
        x = a
    elif x > b:
        x = b
    return -x if flip else x


cdef inline double _draw(double mean, double sd, double lo, double hi, double u) noexcept nogil:
    cdef double x = mean + sd * _std_truncnorm((lo - mean) / sd, (hi - mean) / sd, u)
    # the affine map can round just past a bound
    if x < lo:
        x = lo
    elif x > hi:
        x = hi
    return x


def truncnorm_draw(double mean, double sd, double lo, double hi, double u):
    """Inverse-CDF draw from N(mean, sd^2) restricted to [lo, hi], u in (0, 1]."""
    return _draw(mean, sd, lo, hi, u)


def latent_sweep(double[:, ::1] Z, const long long[::1] y,
                 const double[:, :, ::1] Xa, const double[:, :, ::1] S,
                 double[:, ::1] mt, const long long[::1] m,
                 const double[:, ::1] H, const double[:, ::1] U,
                 double var_floor):
    """One systematic sweep over units then classes, in place.

    Z (n, c) latents; y (n,) labels in 0..c; Xa, S (c, n, mmax) active design
    and ``X A^{-1}`` padded with zeros; mt (c, mmax) posterior means, updated
    incrementally; H (c, n) leverages; U (n, c) uniforms in (0, 1].
    Returns the number of variance-floor hits.
    """
    cdef Py_ssize_t n = Z.shape[0], c = Z.shape[1]
    cdef Py_ssize_t i, j, k, jj, mj
    cdef long long yi
    cdef double f, h, var, sd, mean, lo, hi, old, new, delta, zmax
    cdef int hits = 0
    cdef int bad = 0
    with nogil:
        for i in range(n):
            yi = y[i]
            for j in range(c):
                mj = m[j]
                f = 0.0
                for k in range(mj):
                    f = f + Xa[j, i, k] * mt[j, k]
                h = H[j, i]
                if not h < 1.0:
                    bad = 1
                    break
                old = Z[i, j]
                var = 1.0 / (1.0 - h)
                mean = (f - h * old) * var
                if var < var_floor:
                    var = var_floor
                    hits = hits + 1
                sd = sqrt(var)
                if yi == 0:
                    lo = -INFINITY
                    hi = 0.0
                elif j == yi - 1:
                    zmax = 0.0
                    for jj in range(c):
                        if jj != j and Z[i, jj] > zmax:
                            zmax = Z[i, jj]
                    lo = zmax
                    hi = INFINITY
                else:
                    lo = -INFINITY
                    hi = Z[i, yi - 1]
                new = _draw(mean, sd, lo, hi, U[i, j])
                delta = new - old
                Z[i, j] = new
                for k in range(mj):
                    mt[j, k] = mt[j, k] + S[j, i, k] * delta
            if bad:
                break
    if bad:
        raise ArithmeticError("leverage reached 1 during latent sweep")
    return hits


def log_marginal_gram(const double[:, ::1] G, const double[::1] xtz, double ztz,
                      Py_ssize_t n, const double[::1] mu, const long long[::1] idx,
                      double v):
    """Log marginal density of one latent column from X'X, X'z and z'z."""
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t a, b, k
    cdef double s, rr, logdet, uu
    cdef double[:, ::1] L = np.empty((m, m))
    cdef double[::1] w = np.empty(m)
    cdef double[::1] gmu = np.empty(m)
    with nogil:
        for a in range(m):
            s = 0.0
            for b in range(m):
                s = s + G[idx[a], idx[b]] * mu[idx[b]]
            gmu[a] = s
        rr = ztz
        for a in range(m):
            rr = rr - 2.0 * mu[idx[a]] * xtz[idx[a]] + mu[idx[a]] * gmu[a]
        logdet = 0.0
        for a in range(m):
            for b in range(a + 1):
                s = G[idx[a], idx[b]]
                if a == b:
                    s = s + 1.0 / v
                for k in range(b):
                    s = s - L[a, k] * L[b, k]
                if a == b:
                    if s <= 0.0:
                        logdet = INFINITY
                        break
                    L[a, a] = sqrt(s)
                    logdet = logdet + log(L[a, a])
                else:
                    L[a, b] = s / L[b, b]
            if logdet == INFINITY:
                break
    if logdet == INFINITY:
        raise ArithmeticError("posterior precision is not positive definite")
    with nogil:
        uu = 0.0
        for a in range(m):
            s = xtz[idx[a]] - gmu[a]
            for k in range(a):
                s = s - L[a, k] * w[k]
            w[a] = s / L[a, a]
            uu = uu + w[a] * w[a]
    return -0.5 * (n * _LOG_2PI + m * log(v) + 2.0 * logdet + rr - uu)
