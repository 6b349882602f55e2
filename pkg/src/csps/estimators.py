"""Posterior summaries of sampler output and predictive class probabilities."""
from __future__ import annotations

from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr

from .model import validate_indicator
from .sampler import ChainConfig, ChainOutput, run_chain

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _draws(outputs, attr):
    if isinstance(outputs, ChainOutput):
        outputs = [outputs]
    arrs = [getattr(o, attr) for o in outputs]
    if not arrs or sum(len(a) for a in arrs) == 0:
        raise ValueError("no retained draws")
    return np.concatenate(arrs, axis=0)


def inclusion_probabilities(output) -> np.ndarray:
    """Posterior frequency of every indicator entry.

    Accepts one :class:`ChainOutput` or a list of them (draws are pooled).
    """
    return _draws(output, "m_draws").mean(axis=0)


def posterior_mean_beta(output) -> np.ndarray:
    return _draws(output, "beta_draws").mean(axis=0)


def median_probability_model(mhat: np.ndarray) -> np.ndarray:
    """Entries with inclusion probability of at least one half.

    An exact 0.5 is included; intercepts are always included.
    """
    mhat = np.asarray(mhat, dtype=float)
    M = (mhat >= 0.5).astype(np.int8)
    M[:, 0] = 1
    return M


def conditional_beta_estimate(data, mstar: np.ndarray, config: ChainConfig) -> np.ndarray:
    """Posterior mean of beta with the activity pattern held at ``mstar``."""
    mstar = validate_indicator(mstar)
    cfg = replace(config, fix_indicators=True, initial_indicator=mstar)
    return run_chain(data, cfg).beta_draws.mean(axis=0)


@lru_cache(maxsize=8)
def _gl_rule(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def _composite_rule(panels: int, nodes: int):
    x, w = _gl_rule(nodes)
    edges = np.arange(panels) / panels
    t = (edges[:, None] + x[None, :] / panels).ravel()
    return t, np.tile(w / panels, panels)


def class_probabilities_batch(means: np.ndarray, nodes: int = 100,
                              panel_width: float = 20.0) -> np.ndarray:
    """Class probabilities for rows of latent means, shape (B, c) -> (B, c+1).

    With independent unit-variance latents, class 0 has probability
    ``prod_j Phi(-m_j)`` and class j the integral over t > 0 of
    ``phi(t - m_j) prod_{k != j} Phi(t - m_k)``.  The integrals run over
    (0, max_j m_j + 10) with composite Gauss-Legendre panels no wider than
    ``panel_width``.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    B, c = means.shape
    upper = np.maximum(means.max(axis=1) + 10.0, 1.0)
    panels = max(1, int(np.ceil(upper.max() / panel_width)))
    x, w = _composite_rule(panels, nodes)
    out = np.empty((B, c + 1))
    out[:, 0] = np.exp(log_ndtr(-means).sum(axis=1))
    chunk = max(1, 2_000_000 // (x.size * c))
    for s in range(0, B, chunk):
        m = means[s:s + chunk]
        t = upper[s:s + chunk, None] * x[None, :]
        d = t[:, :, None] - m[:, None, :]
        logcdf = log_ndtr(d)
        total = logcdf.sum(axis=2, keepdims=True)
        logpdf = -0.5 * d * d - _LOG_SQRT_2PI
        integrand = np.exp(logpdf + total - logcdf)
        out[s:s + chunk, 1:] = np.einsum("bgj,g->bj", integrand, w) * upper[s:s + chunk, None]
    return out


def class_probabilities(beta: np.ndarray, x: np.ndarray, nodes: int = 200,
                        tol: float = 1e-10, max_refine: int = 6) -> np.ndarray:
    """Distribution of the class label at predictor vector ``x`` (leading 1).

    Quadrature is refined by doubling the node count until successive
    answers agree to ``tol``.
    """
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != beta.shape[1]:
        raise ValueError(f"x has length {x.shape[-1]}, beta has {beta.shape[1]} columns")
    means = (beta @ x)[None, :]
    prev = class_probabilities_batch(means, nodes=nodes // 2)[0]
    for _ in range(max_refine):
        nodes *= 2
        cur = class_probabilities_batch(means, nodes=nodes // 2)[0]
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    return prev


def predictive_distribution(output, X: np.ndarray) -> np.ndarray:
    """Model-averaged class probabilities: mean over retained beta draws.

    ``X`` is a single predictor vector (leading 1) or a matrix of them; the
    result has shape (c+1,) or (n, c+1) accordingly.
    """
    draws = _draws(output, "beta_draws")
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != draws.shape[2]:
        raise ValueError(f"predictor rows have {X.shape[1]} entries, expected {draws.shape[2]}")
    D, c, _ = draws.shape
    out = np.empty((X.shape[0], c + 1))
    for i, x in enumerate(X):
        out[i] = class_probabilities_batch(draws @ x).mean(axis=0)
    return out[0] if single else out


def predict_classes(probs: np.ndarray) -> np.ndarray:
    """Modal class of each predictive distribution."""
    return np.argmax(np.atleast_2d(probs), axis=1)


def average_squared_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return float(np.mean((estimate - truth) ** 2))
