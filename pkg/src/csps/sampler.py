"""MCMC over (q, M, Z) with the coefficients integrated out.

One iteration updates, in order, every latent Z_ij from its truncated-normal
full conditional, one toggled entry of every row of M (one whole column when
rho = 1), and q.  Coefficient draws are a post-processing step taken only at
recorded iterations.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import expit, logit

from . import kernels
from .gaussian_core import NumericalBreakdown
from .model import (Hyperparameters, ProblemShape, empty_indicator, full_indicator,
                    log_column_prior_scalar, log_prior_indicator, sample_indicator_prior,
                    validate_indicator)

logger = logging.getLogger(__name__)

STARTS = ("empty", "full", "random")


@dataclass(frozen=True)
class TruncationRegion:
    """Latent vectors consistent with an observed label.

    Label 0 requires every coordinate to be negative; label y > 0 requires
    coordinate y to be positive and no smaller than every other coordinate.
    """

    y: int
    c: int

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        if self.y == 0:
            return bool(np.all(z < 0.0))
        zy = z[self.y - 1]
        others = np.delete(z, self.y - 1)
        return bool(zy > 0.0 and np.all(others <= zy))


def truncation_region(y: int, c: int) -> TruncationRegion:
    if not 0 <= y <= c:
        raise ValueError(f"label {y} outside 0..{c}")
    return TruncationRegion(int(y), int(c))


@dataclass
class ChainConfig:
    hp: Hyperparameters
    iterations: int = 11000
    burn_in: int = 1000
    thin: int = 10
    seed: int = 0
    q_proposal_scale: float = 0.5
    start: str = "empty"
    fix_indicators: bool = False
    initial_indicator: np.ndarray | None = None
    var_floor: float = 1e-12
    debug: bool = False

    def __post_init__(self):
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.start not in STARTS:
            raise ValueError(f"start must be one of {STARTS}, got {self.start!r}")
        if self.q_proposal_scale < 0:
            raise ValueError("q_proposal_scale must be >= 0")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainOutput:
    m_draws: np.ndarray
    q_draws: np.ndarray
    beta_draws: np.ndarray
    accept_counts: np.ndarray
    proposal_counts: np.ndarray
    q_accept: int
    q_proposals: int
    floor_hits: int = 0
    seed: int = 0
    start: str = "empty"

    def __len__(self):
        return len(self.q_draws)

    @property
    def acceptance_rates(self) -> np.ndarray:
        return self.accept_counts / np.maximum(self.proposal_counts, 1)

    @property
    def q_acceptance_rate(self) -> float:
        return self.q_accept / max(self.q_proposals, 1)


class ClassCaches:
    """Per-class posterior quantities needed by the latent sweep.

    Arrays are padded to p+1 columns so the compiled sweep can take them
    as-is; ``m[j]`` gives the live width of row j.
    """

    def __init__(self, X: np.ndarray, hp: Hyperparameters, M: np.ndarray, Z: np.ndarray):
        self.X = np.ascontiguousarray(X, dtype=float)
        self.G = np.ascontiguousarray(self.X.T @ self.X)
        self.hp = hp
        self.mu = np.ascontiguousarray(hp.mu, dtype=float)
        n, P = self.X.shape
        c = M.shape[0]
        self.Xa = np.zeros((c, n, P))
        self.S = np.zeros((c, n, P))
        self.mt = np.zeros((c, P))
        self.m = np.zeros(c, dtype=np.int64)
        self.H = np.zeros((c, n))
        self.chol: list[np.ndarray] = [None] * c
        self.idx: list[np.ndarray] = [None] * c
        for j in range(c):
            self.rebuild(j, M[j])
        self.refresh_means(Z)

    def rebuild(self, j: int, row: np.ndarray):
        idx = np.flatnonzero(row).astype(np.int64)
        m = idx.size
        v = self.hp.tau2 / m
        A = self.G[np.ix_(idx, idx)] + np.eye(m) / v
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"class {j + 1}: precision not positive definite") from exc
        Xa = self.X[:, idx]
        S = cho_solve((L, True), Xa.T, check_finite=False).T
        self.Xa[j].fill(0.0)
        self.S[j].fill(0.0)
        self.mt[j].fill(0.0)
        self.Xa[j, :, :m] = Xa
        self.S[j, :, :m] = S
        self.H[j] = np.einsum("ik,ik->i", Xa, S)
        self.m[j] = m
        self.chol[j] = L
        self.idx[j] = idx

    def refresh_means(self, Z: np.ndarray, XtZ: np.ndarray | None = None):
        """Recompute every posterior mean from scratch (no incremental drift)."""
        if XtZ is None:
            XtZ = self.X.T @ Z
        for j, idx in enumerate(self.idx):
            m = idx.size
            v = self.hp.tau2 / m
            self.mt[j, :m] = cho_solve((self.chol[j], True), XtZ[idx, j] + self.mu[idx] / v,
                                         check_finite=False)


@dataclass
class ChainState:
    Z: np.ndarray
    M: np.ndarray
    q: float
    caches: ClassCaches
    accept_counts: np.ndarray = None
    proposal_counts: np.ndarray = None
    q_accept: int = 0
    q_proposals: int = 0
    floor_hits: int = 0
    debug: bool = False

    def __post_init__(self):
        c = self.M.shape[0]
        if self.accept_counts is None:
            self.accept_counts = np.zeros(c, dtype=np.int64)
        if self.proposal_counts is None:
            self.proposal_counts = np.zeros(c, dtype=np.int64)

    @property
    def c(self) -> int:
        return self.M.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[1] - 1

    def in_support(self, labels) -> bool:
        return all(truncation_region(int(y), self.c).contains(z)
                   for y, z in zip(labels, self.Z))


def _check_data(data, hp: Hyperparameters):
    X = np.asarray(data.design, dtype=float)
    y = np.asarray(data.labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("design and labels disagree on n")
    if X.shape[1] != hp.mu.size:
        raise ValueError(f"design has {X.shape[1]} columns but mu has {hp.mu.size}")
    c = int(data.c)
    if c < 1:
        raise ValueError("need at least two classes")
    if y.size and (y.min() < 0 or y.max() > c):
        raise ValueError(f"labels must lie in 0..{c}")
    return X, np.ascontiguousarray(y), c


def initial_latents(y: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    """A point of the truncation region for every unit.

    For y > 0 draw Z_iy from N(0,1) on (0, inf) and the others below it; for
    y = 0 draw every coordinate from N(0,1) on (-inf, 0).
    """
    n = y.size
    Z = np.empty((n, c))
    draw = kernels.truncnorm_draw
    for i in range(n):
        u = 1.0 - rng.random(c)
        if y[i] == 0:
            for j in range(c):
                Z[i, j] = draw(0.0, 1.0, -math.inf, 0.0, u[j])
        else:
            a = y[i] - 1
            Z[i, a] = draw(0.0, 1.0, 0.0, math.inf, u[0])
            for k, j in enumerate(jj for jj in range(c) if jj != a):
                Z[i, j] = draw(0.0, 1.0, -math.inf, Z[i, a], u[k + 1])
    return Z


def initial_state(data, config: ChainConfig, rng: np.random.Generator) -> ChainState:
    hp = config.hp
    X, y, c = _check_data(data, hp)
    p = hp.p
    if y.size == 0 and config.start == "random":
        raise ValueError("start='random' needs labelled data; use 'empty' or 'full' when n = 0")
    q = hp.prior_mean_q
    if config.initial_indicator is not None:
        M = validate_indicator(config.initial_indicator).copy()
        if M.shape != (c, p + 1):
            raise ValueError(f"initial indicator must have shape {(c, p + 1)}")
    elif config.start == "empty":
        M = empty_indicator(c, p)
    elif config.start == "full":
        M = full_indicator(c, p)
    else:
        M = sample_indicator_prior(ProblemShape(y.size, c, p), q, hp.rho, rng)
    if not config.fix_indicators and not np.isfinite(log_prior_indicator(M, q, hp.rho)):
        raise ValueError("starting indicator matrix has zero prior mass for this rho")
    Z = initial_latents(y, c, rng)
    return ChainState(Z, M, q, ClassCaches(X, hp, M, Z), debug=config.debug)


def update_latents(state: ChainState, data, rng: np.random.Generator,
                   var_floor: float = 1e-12) -> ChainState:
    """Systematic truncated-normal sweep over units, then classes."""
    n = state.Z.shape[0]
    if n == 0:
        return state
    cc = state.caches
    U = 1.0 - rng.random((n, state.c))
    y = np.ascontiguousarray(data.labels, dtype=np.int64)
    hits = kernels.latent_sweep(state.Z, y, cc.Xa, cc.S, cc.mt, cc.m, cc.H, U, var_floor)
    state.floor_hits += hits
    if state.debug and not state.in_support(y):
        raise NumericalBreakdown("latent sweep left the truncation region")
    return state


def _row_log_marginal(cc: ClassCaches, XtZ, ztz, n, j, idx) -> float:
    v = cc.hp.tau2 / idx.size
    return kernels.log_marginal_gram(cc.G, XtZ[j], float(ztz[j]), n, cc.mu, idx, v)


def update_indicators(state: ChainState, data, rng: np.random.Generator) -> ChainState:
    """Metropolis-Hastings toggles of M; one proposal per class row.

    For rho = 1 a single column is toggled as a block across all rows.
    Acceptance uses exact log marginal densities of the latent columns
    plus the change in the column-mixture prior.
    """
    cc = state.caches
    M, q, rho = state.M, state.q, cc.hp.rho
    c, p = state.c, state.p
    Z = state.Z
    n = Z.shape[0]
    # rows of XtZ are X'z_j, contiguous for the kernel
    XtZ = np.ascontiguousarray((cc.X.T @ Z).T)
    ztz = np.einsum("ij,ij->j", Z, Z)
    if rho < 1.0:
        ks = rng.integers(1, p + 1, size=c)
        logu = np.log(rng.random(c))
        for j in range(c):
            k = ks[j]
            cur = cc.idx[j]
            row = M[j].copy()
            row[k] ^= 1
            new = np.flatnonzero(row).astype(np.int64)
            s_old = int(M[:, k].sum())
            s_new = s_old + (1 if row[k] else -1)
            log_ratio = (_row_log_marginal(cc, XtZ, ztz, n, j, new)
                         - _row_log_marginal(cc, XtZ, ztz, n, j, cur)
                         + log_column_prior_scalar(s_new, c, q, rho)
                         - log_column_prior_scalar(s_old, c, q, rho))
            state.proposal_counts[j] += 1
            if logu[j] < log_ratio:
                M[j, k] = row[k]
                state.accept_counts[j] += 1
                cc.rebuild(j, M[j])
    else:
        k = int(rng.integers(1, p + 1))
        logu = math.log(rng.random())
        turn_on = M[0, k] == 0
        log_ratio = math.log(q) - math.log1p(-q)
        if not turn_on:
            log_ratio = -log_ratio
        for j in range(c):
            row = M[j].copy()
            row[k] ^= 1
            new = np.flatnonzero(row).astype(np.int64)
            log_ratio += (_row_log_marginal(cc, XtZ, ztz, n, j, new)
                          - _row_log_marginal(cc, XtZ, ztz, n, j, cc.idx[j]))
        state.proposal_counts += 1
        if logu < log_ratio:
            M[:, k] ^= 1
            state.accept_counts += 1
            for j in range(c):
                cc.rebuild(j, M[j])
    cc.refresh_means(Z, XtZ.T)
    return state


def update_q(state: ChainState, rng: np.random.Generator, gamma1: float | None = None,
             gamma2: float | None = None, scale: float = 0.5) -> ChainState:
    """Update q: logit random walk for rho < 1, exact Beta draw for rho = 1."""
    hp = state.caches.hp
    g1 = hp.gamma1 if gamma1 is None else gamma1
    g2 = hp.gamma2 if gamma2 is None else gamma2
    rho = hp.rho
    M = state.M
    c, p = state.c, state.p
    if rho == 1.0:
        K = int(np.sum(M[:, 1:].all(axis=0)))
        state.q = float(rng.beta(g1 + K, g2 + p - K))
        state.q_accept += 1
        state.q_proposals += 1
        return state
    counts = M[:, 1:].sum(axis=0).tolist()

    def log_target(q):
        # Beta prior and pi(M|q) in logit coordinates (Jacobian q(1-q) folded in)
        return g1 * math.log(q) + g2 * math.log1p(-q) + sum(
            log_column_prior_scalar(s, c, q, rho) for s in counts)

    eta = logit(state.q) + scale * rng.standard_normal()
    q_new = float(expit(eta))
    logu = math.log(rng.random())
    state.q_proposals += 1
    if 0.0 < q_new < 1.0 and logu < log_target(q_new) - log_target(state.q):
        state.q = q_new
        state.q_accept += 1
    return state


def draw_beta(state: ChainState, rng: np.random.Generator) -> np.ndarray:
    """Coefficient matrix drawn from its Gaussian full conditional."""
    cc = state.caches
    beta = np.zeros(state.M.shape)
    for j in range(state.c):
        idx = cc.idx[j]
        m = idx.size
        eps = rng.standard_normal(m)
        beta[j, idx] = cc.mt[j, :m] + solve_triangular(cc.chol[j].T, eps, lower=False,
                                                            check_finite=False)
    return beta


def run_chain(data, config: ChainConfig, rng: np.random.Generator | None = None) -> ChainOutput:
    """Run one chain; deterministic given (config.seed, config, data)."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = initial_state(data, config, rng)
    T = config.n_draws
    c, P = state.M.shape
    m_draws = np.zeros((T, c, P), dtype=np.int8)
    q_draws = np.zeros(T)
    beta_draws = np.zeros((T, c, P))
    t = 0
    for it in range(config.iterations):
        update_latents(state, data, rng, config.var_floor)
        if not config.fix_indicators:
            update_indicators(state, data, rng)
            update_q(state, rng, scale=config.q_proposal_scale)
        elif state.Z.shape[0]:
            state.caches.refresh_means(state.Z)
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            m_draws[t] = state.M
            q_draws[t] = state.q
            beta_draws[t] = draw_beta(state, rng)
            t += 1
    if state.floor_hits:
        logger.warning("variance floor applied %d times", state.floor_hits)
    return ChainOutput(m_draws, q_draws, beta_draws, state.accept_counts.copy(),
                       state.proposal_counts.copy(), state.q_accept, state.q_proposals,
                       state.floor_hits, seed=config.seed, start=config.start)


def _run_one(args):
    data, config = args
    return run_chain(data, config)


def run_chains(data, config: ChainConfig, n_chains: int = 2, starts=None, seeds=None,
               workers: int = 1) -> list[ChainOutput]:
    """Independent chains, ordered by chain index.

    Seeds default to ``config.seed + chain_index``; starts default to
    ``config.start`` for every chain.
    """
    if starts is None:
        starts = [config.start] * n_chains
    if seeds is None:
        seeds = [config.seed + i for i in range(n_chains)]
    if len(starts) != n_chains or len(seeds) != n_chains:
        raise ValueError("need one start and one seed per chain")
    if len(set(seeds)) < len(seeds):
        warnings.warn("chains share a seed; their outputs will not be independent",
                      stacklevel=2)
    configs = [replace(config, seed=int(s), start=st) for s, st in zip(seeds, starts)]
    if workers > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, [(data, cfg) for cfg in configs]))
    return [run_chain(data, cfg) for cfg in configs]
