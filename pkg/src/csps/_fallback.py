"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Selected automatically when the extension is unavailable, or on request via
``CSPS_PURE_PYTHON=1``.  Numerically interchangeable with the compiled path.
"""
import math

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .gaussian_core import log_marginal_from_gram

_log_ndtr = log_ndtr
_ndtri_exp = ndtri_exp


def _std_truncnorm(a, b, u):
    flip = a > 0.0
    if flip:
        a, b = -b, -a
    la = float(_log_ndtr(a))
    lb = float(_log_ndtr(b))
    r = math.exp(la - lb)
    x = float(_ndtri_exp(lb + math.log(r + u * (1.0 - r))))
    if x < a:
        x = a
    elif x > b:
        x = b
    return -x if flip else x


def truncnorm_draw(mean, sd, lo, hi, u):
    """Inverse-CDF draw from N(mean, sd^2) restricted to [lo, hi], u in (0, 1]."""
    x = mean + sd * _std_truncnorm((lo - mean) / sd, (hi - mean) / sd, u)
    # the affine map can round just past a bound
    if x < lo:
        x = lo
    elif x > hi:
        x = hi
    return x


def latent_sweep(Z, y, Xa, S, mt, m, H, U, var_floor):
    n, c = Z.shape
    hits = 0
    for i in range(n):
        yi = int(y[i])
        for j in range(c):
            mj = int(m[j])
            f = 0.0
            xrow = Xa[j, i]
            mrow = mt[j]
            for k in range(mj):
                f = f + xrow[k] * mrow[k]
            h = H[j, i]
            if not h < 1.0:
                raise ArithmeticError("leverage reached 1 during latent sweep")
            old = Z[i, j]
            var = 1.0 / (1.0 - h)
            mean = (f - h * old) * var
            if var < var_floor:
                var = var_floor
                hits += 1
            sd = math.sqrt(var)
            if yi == 0:
                lo, hi = -math.inf, 0.0
            elif j == yi - 1:
                zmax = 0.0
                for jj in range(c):
                    if jj != j and Z[i, jj] > zmax:
                        zmax = Z[i, jj]
                lo, hi = zmax, math.inf
            else:
                lo, hi = -math.inf, Z[i, yi - 1]
            new = truncnorm_draw(mean, sd, lo, hi, U[i, j])
            delta = new - old
            Z[i, j] = new
            srow = S[j, i]
            for k in range(mj):
                mrow[k] = mrow[k] + srow[k] * delta
    return hits


def log_marginal_gram(G, xtz, ztz, n, mu, idx, v):
    return log_marginal_from_gram(np.asarray(G), np.asarray(xtz), ztz, n,
                                  np.asarray(mu), np.asarray(idx), v)
