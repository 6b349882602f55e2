"""Datasets, preprocessing, synthetic scenarios and resampling splits."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import LabelMap, default_intercept_mean


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class Dataset:
    """Design matrix with a leading column of ones, plus encoded labels.

    ``labels`` take values in 0..c, where 0 is the reference class of
    ``label_map``.
    """

    design: np.ndarray
    labels: np.ndarray
    label_map: LabelMap
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.design.ndim != 2 or self.design.shape[1] < 2:
            raise DataError("design must be n x (p+1) with p >= 1")
        if self.design.shape[0] != self.labels.size:
            raise DataError("design and labels disagree on n")
        if self.design.shape[0] and not np.all(self.design[:, 0] == 1.0):
            raise DataError("design column 0 must be all ones")
        if not np.all(np.isfinite(self.design)):
            raise DataError("design contains missing or non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > self.c):
            raise DataError(f"labels must lie in 0..{self.c}")
        if not self.feature_names:
            self.feature_names = [f"x{k}" for k in range(1, self.p + 1)]

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1] - 1

    @property
    def c(self) -> int:
        return self.label_map.c

    @property
    def covariates(self) -> np.ndarray:
        return self.design[:, 1:]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, design=self.design[idx], labels=self.labels[idx])

    def with_covariates(self, covariates: np.ndarray, names=None) -> "Dataset":
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        design = np.column_stack([np.ones(covariates.shape[0]), covariates])
        names = names or [f"x{k}" for k in range(1, covariates.shape[1] + 1)]
        return replace(self, design=design, feature_names=list(names))

    @classmethod
    def from_arrays(cls, covariates, labels, reference=None, names=None,
                    label_map: LabelMap | None = None) -> "Dataset":
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        if label_map is None:
            label_map = LabelMap.from_labels(list(labels), reference)
        design = np.column_stack([np.ones(covariates.shape[0]), covariates])
        return cls(design, label_map.encode(list(labels)), label_map, list(names or []))


def load_csv(path, label_column: str, reference_class=None,
             label_map: LabelMap | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Every column other than ``label_column`` must be numeric.  The reference
    class maps to 0 and the other labels follow in sorted order, unless an
    existing ``label_map`` is supplied (used when scoring new data).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: no label column {label_column!r} in header {header}")
        li = header.index(label_column)
        names = [h for k, h in enumerate(header) if k != li]
        rows, raw_labels = [], []
        for r, rec in enumerate(reader, start=2):
            if not rec or all(not s.strip() for s in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {r} has {len(rec)} fields, expected {len(header)}")
            vals = []
            for k, s in enumerate(rec):
                if k == li:
                    continue
                s = s.strip()
                if not s:
                    raise DataError(f"{path}: missing value at row {r}, column {header[k]!r}")
                try:
                    vals.append(float(s))
                except ValueError:
                    raise DataError(f"{path}: non-numeric value {s!r} at row {r}, "
                                    f"column {header[k]!r}") from None
            lab = rec[li].strip()
            if not lab:
                raise DataError(f"{path}: missing label at row {r}")
            rows.append(vals)
            raw_labels.append(lab)
    if not names:
        raise DataError(f"{path}: no predictor columns")
    cov = np.array(rows, dtype=float).reshape(len(rows), len(names))
    if label_map is None:
        if len(set(raw_labels)) < 2:
            raise DataError(f"{path}: need at least two classes")
        try:
            label_map = LabelMap.from_labels(raw_labels, reference_class)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    try:
        labels = label_map.encode(raw_labels)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    design = np.column_stack([np.ones(len(rows)), cov])
    return Dataset(design, labels, label_map, names)


def read_predictors(path, names, label_column: str | None = None):
    """Columns ``names`` (in that order) of a CSV file, plus the raw label
    column when present."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [nm for nm in names if nm not in header]
        extra = [h for h in header if h not in names and h != label_column]
        if missing or extra:
            raise DataError(f"{path}: feature mismatch (missing {missing}, unexpected {extra}); "
                            f"expected {len(names)} predictors {list(names)}")
        cols = [header.index(nm) for nm in names]
        li = header.index(label_column) if label_column in header else None
        rows, labels = [], []
        for r, rec in enumerate(reader, start=2):
            if not rec or all(not s.strip() for s in rec):
                continue
            try:
                rows.append([float(rec[k]) for k in cols])
            except (ValueError, IndexError):
                raise DataError(f"{path}: missing or non-numeric predictor at row {r}") from None
            if li is not None:
                labels.append(rec[li].strip())
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return X, (labels if li is not None else None)


def write_csv(path, dataset: Dataset, label_column: str = "label"):
    path = Path(path)
    decoded = dataset.label_map.decode(dataset.labels)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(dataset.feature_names) + [label_column])
        for row, lab in zip(dataset.covariates, decoded):
            w.writerow([format_number(v) for v in row] + [lab])


def format_number(v) -> str:
    return f"{float(v):.17g}"


@dataclass(frozen=True)
class Standardization:
    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.scale) <= 0):
            raise DataError("standardization scales must be positive")


def standardize(dataset: Dataset) -> tuple[Dataset, Standardization]:
    """Centre and scale columns 1..p to sample mean 0 and sample SD 1."""
    if dataset.n < 2:
        raise DataError("standardization needs at least two units")
    cov = dataset.covariates
    shift = cov.mean(axis=0)
    scale = cov.std(axis=0, ddof=1)
    const = np.flatnonzero(~(scale > 0))
    if const.size:
        names = [dataset.feature_names[k] for k in const]
        raise DataError(f"constant predictor column(s): {names}")
    s = Standardization(shift, scale)
    return apply_standardization(dataset, s), s


def apply_standardization(dataset: Dataset, s: Standardization) -> Dataset:
    if s.shift.size != dataset.p:
        raise DataError(f"standardization is for p={s.shift.size}, data has p={dataset.p}")
    cov = (dataset.covariates - s.shift) / s.scale
    return dataset.with_covariates(cov, dataset.feature_names)


@dataclass(frozen=True)
class RbfConfig:
    """Gaussian radial basis features ``a_k + b_k exp(-|v - knot_k|^2 / 2h^2)``."""

    knots: np.ndarray
    bandwidth: float = 4.0
    a: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        knots = np.atleast_2d(np.asarray(self.knots, dtype=float))
        if knots.shape[0] == 0:
            raise DataError("RBF features need at least one knot")
        if not self.bandwidth > 0:
            raise DataError("RBF bandwidth must be positive")
        object.__setattr__(self, "knots", knots)
        if self.b is not None and np.any(np.asarray(self.b) == 0):
            raise DataError("RBF scale constants must be nonzero")


def _rbf_raw(covariates, knots, h):
    d2 = ((covariates[:, None, :] - knots[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * h * h))


def fit_rbf(covariates, n_knots: int, rng: np.random.Generator, bandwidth: float = 4.0) -> RbfConfig:
    """Pick knots among the rows of ``covariates`` and standardizing constants.

    The constants make every feature column of the construction sample have
    mean 0 and sample SD 1.
    """
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    n = covariates.shape[0]
    if not 1 <= n_knots <= n:
        raise DataError(f"need 1 <= n_knots <= n, got {n_knots} with n={n}")
    knots = covariates[rng.choice(n, size=n_knots, replace=False)]
    raw = _rbf_raw(covariates, knots, bandwidth)
    sd = raw.std(axis=0, ddof=1)
    zero = np.flatnonzero(~(sd > 1e-12 * np.maximum(np.abs(raw).max(axis=0), 1e-300)))
    if zero.size:
        raise DataError(f"RBF feature(s) {zero.tolist()} have zero variance on the construction sample")
    b = 1.0 / sd
    a = -raw.mean(axis=0) * b
    _warn_duplicates(knots)
    return RbfConfig(knots, bandwidth, a, b)


def _warn_duplicates(knots):
    uniq = np.unique(knots, axis=0)
    if uniq.shape[0] < knots.shape[0]:
        warnings.warn(f"{knots.shape[0] - uniq.shape[0]} duplicate RBF knot(s) give identical "
                      "feature columns", stacklevel=3)


def rbf_features(covariates, cfg: RbfConfig) -> np.ndarray:
    """Feature matrix (n x p) for the given knots and standardizing constants.

    When ``cfg`` has no constants they are fitted on ``covariates`` itself.
    """
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    raw = _rbf_raw(covariates, cfg.knots, cfg.bandwidth)
    if cfg.a is None or cfg.b is None:
        sd = raw.std(axis=0, ddof=1) if raw.shape[0] > 1 else np.zeros(raw.shape[1])
        if np.any(~(sd > 0)):
            raise DataError("RBF feature with zero variance on the construction sample")
        _warn_duplicates(cfg.knots)
        return (raw - raw.mean(axis=0)) / sd
    return cfg.a + cfg.b * raw


# synthetic scenarios ------------------------------------------------------

SCENARIO_C = 5
SCENARIO_P = 15
SCENARIO_N = 250


def scenario_correlation() -> np.ndarray:
    """Correlation of the 15 synthetic predictors.

    X1..X6 are equicorrelated (0.5); X7..X12 are X1..X6 scaled by 0.8 plus
    independent noise; X13..X15 are independent of everything.
    """
    B = np.full((6, 6), 0.5) + 0.5 * np.eye(6)
    R = np.eye(SCENARIO_P)
    R[:6, :6] = B
    R[:6, 6:12] = 0.8 * B
    R[6:12, :6] = 0.8 * B
    R[6:12, 6:12] = 0.64 * B + 0.36 * np.eye(6)
    return R


def scenario1_beta() -> np.ndarray:
    c, p = SCENARIO_C, SCENARIO_P
    beta = np.zeros((c, p + 1))
    beta[:, 0] = default_intercept_mean(c)
    for j in range(1, c + 1):
        beta[j - 1, j] = 0.75
        beta[j - 1, j + 1] = 0.5
    return beta


def scenario2_signs(j: int) -> np.ndarray:
    """Sign vector of row j over columns 1..6: bit b of j flips column b+1."""
    signs = np.ones(6)
    for b in range(6):
        if (j >> b) & 1:
            signs[b] = -1.0
    return signs


def scenario2_beta() -> np.ndarray:
    c, p = SCENARIO_C, SCENARIO_P
    beta = np.zeros((c, p + 1))
    beta[:, 0] = default_intercept_mean(c)
    mags = np.array([0.75, 0.75, 0.75, 0.5, 0.5, 0.5])
    for j in range(1, c + 1):
        beta[j - 1, 1:7] = mags * scenario2_signs(j)
    return beta


def generate_covariates(n: int, rng: np.random.Generator, corr: np.ndarray | None = None) -> np.ndarray:
    corr = scenario_correlation() if corr is None else corr
    L = np.linalg.cholesky(corr)
    return rng.standard_normal((n, corr.shape[0])) @ L.T


def generate_labels(X: np.ndarray, beta_true: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Labels from Z ~ N(beta X, I): argmax class if positive, else 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    beta_true = np.asarray(beta_true, dtype=float)
    Z = X @ beta_true.T + rng.standard_normal((X.shape[0], beta_true.shape[0]))
    top = Z.argmax(axis=1)
    return np.where(Z[np.arange(X.shape[0]), top] > 0.0, top + 1, 0).astype(np.int64)


def _simulate(beta, seed, n):
    rng = np.random.default_rng(seed)
    cov = generate_covariates(n, rng)
    design = np.column_stack([np.ones(n), cov])
    labels = generate_labels(design, beta, rng)
    lm = LabelMap(list(range(beta.shape[0] + 1)))
    return Dataset(design, labels, lm), beta


def simulate_scenario1(seed: int, n: int = SCENARIO_N) -> tuple[Dataset, np.ndarray]:
    return _simulate(scenario1_beta(), seed, n)


def simulate_scenario2(seed: int, n: int = SCENARIO_N) -> tuple[Dataset, np.ndarray]:
    return _simulate(scenario2_beta(), seed, n)


SCENARIOS = {1: simulate_scenario1, 2: simulate_scenario2}


# splits --------------------------------------------------------------------

def kfold_splits(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random k-fold partition; fold sizes differ by at most one."""
    if not 1 <= k <= n:
        raise DataError(f"need 1 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for f in folds:
        test = np.sort(f)
        train = np.setdiff1d(np.arange(n), test)
        out.append((train, test))
    return out


def loocv_splits(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    idx = np.arange(n)
    return [(np.delete(idx, i), np.array([i])) for i in range(n)]


def train_test_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie in (0, 1)")
    n_train = int(math.floor(n * fraction + 0.5))
    if not 0 < n_train < n:
        raise DataError(f"split of n={n} at fraction {fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])
