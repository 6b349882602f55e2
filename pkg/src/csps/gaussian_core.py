"""Marginalised Gaussian algebra for one class row.

With the active coefficients of class j integrated out, the latent column
``z = Z[:, j]`` is ``N(X mu, I + X V X')`` where ``X`` holds the active
columns and ``V = v I`` with ``v = tau2 / m``.  Everything here is computed
through the m x m posterior precision ``A = V^{-1} + X'X``::

    log|I + X V X'|      = log|V| + log|A|
    (I + X V X')^{-1}    = I - X A^{-1} X'

so no n x n matrix is ever formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .model import Hyperparameters

LOG_2PI = math.log(2.0 * math.pi)


class NumericalBreakdown(ArithmeticError):
    """Raised when an exact-arithmetic invariant fails numerically."""


@dataclass(frozen=True)
class ActiveDesign:
    """Design restricted to the active columns of one class row."""

    columns: np.ndarray
    prior_mean: np.ndarray
    prior_var: float

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.columns, dtype=float))
        mu = np.asarray(self.prior_mean, dtype=float).ravel()
        if X.shape[1] != mu.size or mu.size < 1:
            raise ValueError("design columns and prior mean disagree on m")
        if not self.prior_var > 0:
            raise ValueError("prior variance must be positive")
        object.__setattr__(self, "columns", X)
        object.__setattr__(self, "prior_mean", mu)

    @classmethod
    def from_row(cls, X: np.ndarray, row: np.ndarray, hp: Hyperparameters) -> "ActiveDesign":
        idx = np.flatnonzero(row)
        return cls(X[:, idx], hp.mu[idx], hp.tau2 / idx.size)

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    @property
    def prior_var_vector(self) -> np.ndarray:
        return np.full(self.m, self.prior_var)


@dataclass(frozen=True)
class CoefficientPosterior:
    """Posterior of the active coefficients given a latent column.

    ``precision_factor`` is the lower Cholesky factor of the posterior
    precision ``A``.
    """

    mean: np.ndarray
    precision_factor: np.ndarray
    log_det_V: float
    log_det_Vtilde: float

    def covariance(self) -> np.ndarray:
        return cho_solve((self.precision_factor, True), np.eye(self.mean.size))

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return ``A^{-1} b``."""
        return cho_solve((self.precision_factor, True), b)


def _cholesky(A: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("posterior precision is not positive definite") from exc
    if not np.all(np.isfinite(np.diag(L))):
        raise NumericalBreakdown("posterior precision has non-finite entries")
    return L


def coefficient_posterior(d: ActiveDesign, z: np.ndarray) -> CoefficientPosterior:
    z = np.asarray(z, dtype=float).ravel()
    if z.size != d.n:
        raise ValueError(f"latent column has length {z.size}, expected {d.n}")
    X, v = d.columns, d.prior_var
    A = X.T @ X + np.eye(d.m) / v
    L = _cholesky(A)
    rhs = X.T @ z + d.prior_mean / v
    mean = cho_solve((L, True), rhs)
    log_det_A = 2.0 * np.sum(np.log(np.diag(L)))
    return CoefficientPosterior(mean, L, d.m * math.log(v), -log_det_A)


def log_marginal_column(d: ActiveDesign, z: np.ndarray,
                        post: CoefficientPosterior | None = None) -> float:
    """Normalised log density of ``z`` under ``N(X mu, I + X V X')``."""
    z = np.asarray(z, dtype=float).ravel()
    if post is None:
        post = coefficient_posterior(d, z)
    X = d.columns
    r = z - X @ d.prior_mean
    w = X.T @ r
    u = solve_triangular(post.precision_factor, w, lower=True)
    quad = r @ r - u @ u
    log_det_C = post.log_det_V - post.log_det_Vtilde
    return -0.5 * (d.n * LOG_2PI + log_det_C + quad)


def leverages(d: ActiveDesign, post: CoefficientPosterior) -> np.ndarray:
    """``h_i = x_i' A^{-1} x_i`` for every unit."""
    W = solve_triangular(post.precision_factor, d.columns.T, lower=True)
    return np.einsum("ij,ij->j", W, W)


def latent_conditional(d: ActiveDesign, z: np.ndarray, i: int,
                       cache: CoefficientPosterior) -> tuple[float, float]:
    """Mean and variance of ``z_i`` given the other latents of the column.

    The precision of the joint is ``I - X A^{-1} X'`` and its action on the
    centred latents is ``z - X mu_tilde``, which gives the closed forms

        var  = 1 / (1 - h_i)
        mean = (x_i' mu_tilde - h_i z_i) / (1 - h_i)
    """
    x = d.columns[i]
    h = float(x @ cache.solve(x))
    if not h < 1.0:
        raise NumericalBreakdown(f"leverage h_{i} = {h} is not below 1")
    fit = float(x @ cache.mean)
    var = 1.0 / (1.0 - h)
    mean = (fit - h * float(z[i])) * var
    return mean, var


def refresh_after_latent_change(cache: CoefficientPosterior, d: ActiveDesign, i: int,
                                old_z_i: float, new_z_i: float) -> CoefficientPosterior:
    """Cache for the latent column with ``z_i`` replaced; O(m^2)."""
    delta = new_z_i - old_z_i
    if delta == 0.0:
        return cache
    mean = cache.mean + cache.solve(d.columns[i]) * delta
    return CoefficientPosterior(mean, cache.precision_factor, cache.log_det_V,
                                cache.log_det_Vtilde)


def log_marginal_from_gram(G: np.ndarray, xtz: np.ndarray, ztz: float, n: int,
                           mu: np.ndarray, idx: np.ndarray, v: float) -> float:
    """Same density as :func:`log_marginal_column` from sufficient statistics.

    ``G = X'X`` and ``xtz = X'z`` are over all p+1 columns; ``idx`` selects
    the active ones.  Cost is O(m^3), independent of n.
    """
    Gs = G[np.ix_(idx, idx)]
    m = idx.size
    mus = mu[idx]
    b = xtz[idx]
    A = Gs + np.eye(m) / v
    L = _cholesky(A)
    Gmu = Gs @ mus
    rr = ztz - 2.0 * (mus @ b) + mus @ Gmu
    u = solve_triangular(L, b - Gmu, lower=True)
    log_det_A = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (n * LOG_2PI + m * math.log(v) + log_det_A + rr - u @ u)
