"""Domain types and prior computations for the coefficient matrix, its
activity pattern and the active-proportion parameter.

The prior is hierarchical:

* ``q ~ Beta(gamma1, gamma2)`` is the population proportion of active
  coefficients;
* given ``q``, every non-intercept column of the c x (p+1) indicator matrix
  ``M`` is drawn from a two-component mixture of i.i.d. Bernoulli columns,
  tuned so that ``Pr(M_jk = 1 | q) = q`` and the within-column correlation
  equals ``rho``;
* given ``M``, active coefficients are independent normals centred at
  ``mu_k`` with variance ``tau2 / M_j+`` (inactive coefficients are zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri, xlog1py, xlogy


@dataclass(frozen=True)
class ProblemShape:
    """Sizes of a classification problem: n units, c+1 classes, p predictors."""

    n: int
    c: int
    p: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if self.c < 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")


def default_intercept_mean(c: int) -> float:
    """Intercept centre that makes all c+1 classes equally likely at X = 0.

    Returns ``Phi^{-1}(1 - (c+1)^{-1/c})``.
    """
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    return float(ndtri(1.0 - (c + 1.0) ** (-1.0 / c)))


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed hyperparameters of the prior.

    Parameters
    ----------
    mu : ndarray, shape (p+1,)
        Prior centres of the coefficients; ``mu[0]`` is the intercept centre.
    tau2 : float
        Total prior variance of a class row, split evenly over its active
        coefficients.
    rho : float
        Within-column correlation of the indicator entries, in [0, 1].
    gamma1, gamma2 : float
        Beta prior shapes for ``q``.
    """

    mu: np.ndarray
    tau2: float = 4.0
    rho: float = 0.0
    gamma1: float = 5.0
    gamma2: float = 15.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size < 2:
            raise ValueError("mu must be a vector of length p+1 >= 2")
        object.__setattr__(self, "mu", mu)
        if not self.tau2 > 0:
            raise ValueError(f"tau2 must be > 0, got {self.tau2}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be > 0")

    @property
    def p(self) -> int:
        return self.mu.size - 1

    @classmethod
    def default(cls, c: int, p: int, **kwargs) -> "Hyperparameters":
        """Zero-centred slopes and the uniform-classes intercept centre."""
        mu = np.zeros(p + 1)
        mu[0] = default_intercept_mean(c)
        return cls(mu=mu, **kwargs)

    @property
    def prior_mean_q(self) -> float:
        return self.gamma1 / (self.gamma1 + self.gamma2)


def validate_indicator(M: np.ndarray) -> np.ndarray:
    """Return ``M`` as a c x (p+1) int8 array, checking the intercept column."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[1] < 2:
        raise ValueError(f"indicator matrix must be c x (p+1), got shape {M.shape}")
    if not np.isin(M, (0, 1)).all():
        raise ValueError("indicator matrix entries must be 0 or 1")
    if not (M[:, 0] == 1).all():
        raise ValueError("intercept column of the indicator matrix must be all ones")
    return M.astype(np.int8)


def empty_indicator(c: int, p: int) -> np.ndarray:
    M = np.zeros((c, p + 1), dtype=np.int8)
    M[:, 0] = 1
    return M


def full_indicator(c: int, p: int) -> np.ndarray:
    return np.ones((c, p + 1), dtype=np.int8)


def prior_moments(M: np.ndarray, hp: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Prior mean and variance of every coefficient given ``M``.

    Active entries of row j have variance ``tau2 / M_j+`` so that each row's
    variances sum to ``tau2`` regardless of how many entries are active.
    """
    M = validate_indicator(M)
    if M.shape[1] != hp.mu.size:
        raise ValueError("M and mu disagree on p")
    active = M.astype(bool)
    row_counts = active.sum(axis=1, keepdims=True)
    mean = np.where(active, hp.mu[None, :], 0.0)
    var = np.where(active, hp.tau2 / row_counts, 0.0)
    return mean, var


def mixture_probs(q: float, rho: float) -> tuple[float, float]:
    """Bernoulli probabilities of the two column-mixture components."""
    s = np.sqrt(rho)
    p0 = (1.0 - s) * q
    return p0, p0 + s


def log_column_prior(counts, c: int, q: float, rho: float):
    """Log prior mass of non-intercept columns with the given active counts.

    ``counts`` may be a scalar or array of column sums ``M_+k``.
    """
    counts = np.asarray(counts, dtype=float)
    if rho == 1.0:
        # all-or-nothing columns; mixed columns carry no mass
        out = np.full(counts.shape, -np.inf)
        out = np.where(counts == 0, np.log1p(-q), out)
        out = np.where(counts == c, np.log(q), out)
        return out
    p0, p1 = mixture_probs(q, rho)
    inactive = c - counts
    a = np.log1p(-q) + xlogy(counts, p0) + xlog1py(inactive, -p0)
    b = np.log(q) + xlogy(counts, p1) + xlog1py(inactive, -p1)
    return np.logaddexp(a, b)


def log_column_prior_scalar(s: int, c: int, q: float, rho: float) -> float:
    """Scalar twin of :func:`log_column_prior` for the sampler's inner loop."""
    if rho == 1.0:
        if s == 0:
            return math.log1p(-q)
        return math.log(q) if s == c else -math.inf
    r = math.sqrt(rho)
    p0 = (1.0 - r) * q
    p1 = p0 + r
    a = math.log1p(-q) + (s * math.log(p0) if s else 0.0) + (c - s) * math.log1p(-p0)
    b = math.log(q) + s * math.log(p1) + ((c - s) * math.log1p(-p1) if c - s else 0.0)
    hi = max(a, b)
    return hi + math.log1p(math.exp(min(a, b) - hi))


def log_prior_indicator(M: np.ndarray, q: float, rho: float) -> float:
    """log pi(M | q) for the column-mixture prior; ``-inf`` for zero mass.

    The intercept column is structural and excluded from the product.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    M = validate_indicator(M)
    c = M.shape[0]
    counts = M[:, 1:].sum(axis=0)
    return float(np.sum(log_column_prior(counts, c, q, rho)))


def sample_indicator_prior(shape: ProblemShape, q: float, rho: float,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw M from its prior given q; the intercept column is set to ones."""
    c, p = shape.c, shape.p
    p0, p1 = mixture_probs(q, rho)
    component = rng.random(p) < q
    probs = np.where(component, p1, p0)
    M = np.empty((c, p + 1), dtype=np.int8)
    M[:, 0] = 1
    M[:, 1:] = rng.random((c, p)) < probs[None, :]
    return M


def log_prior_q(q: float, gamma1: float, gamma2: float) -> float:
    """Unnormalised Beta log density."""
    return (gamma1 - 1.0) * np.log(q) + (gamma2 - 1.0) * np.log1p(-q)


@dataclass
class LabelMap:
    """Bijection between original class labels and indices 0..c.

    Index 0 is the reference class; the remaining labels follow in sorted
    order.
    """

    labels: list = field(default_factory=list)

    @classmethod
    def from_labels(cls, raw, reference=None) -> "LabelMap":
        uniq = sorted(set(raw), key=_sort_key)
        if len(uniq) < 2:
            raise ValueError("need at least two distinct class labels")
        if reference is None:
            reference = uniq[0]
        matches = [u for u in uniq if u == reference or str(u) == str(reference)]
        if not matches:
            raise ValueError(f"reference class {reference!r} not among labels {uniq}")
        ref = matches[0]
        return cls([ref] + [u for u in uniq if u != ref])

    @property
    def c(self) -> int:
        return len(self.labels) - 1

    @property
    def reference(self):
        return self.labels[0]

    def encode(self, raw) -> np.ndarray:
        index = {str(lab): i for i, lab in enumerate(self.labels)}
        try:
            return np.array([index[str(r)] for r in raw], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown class label {exc.args[0]!r}") from None

    def decode(self, idx) -> list:
        return [self.labels[int(i)] for i in idx]


def _sort_key(v):
    # numbers before strings, each in natural order
    try:
        return (0, float(v), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(v))
