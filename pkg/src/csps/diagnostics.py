"""Mixing diagnostics over thinned indicator draws, and classification scores."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def switch_rates(m_draws) -> np.ndarray:
    """Fraction of consecutive draws in which each indicator entry changes."""
    m = np.asarray(m_draws)
    if m.ndim != 3 or m.shape[0] < 2:
        raise ValueError("need at least two draws of shape (c, p+1)")
    return (m[1:] != m[:-1]).mean(axis=0)


def iid_switch_reference(mhat: np.ndarray) -> np.ndarray:
    """Switch rate expected under independent sampling: 2 M(1 - M)."""
    mhat = np.asarray(mhat, dtype=float)
    return 2.0 * mhat * (1.0 - mhat)


def switch_rate_se(reference: np.ndarray, n_draws: int) -> np.ndarray:
    """Binomial standard error of a switch rate at the i.i.d. reference."""
    r = np.clip(reference, 0.0, 1.0)
    return np.sqrt(r * (1.0 - r) / max(n_draws - 1, 1))


def mixing_ratio(m_draws, min_reference: float = 0.05) -> float:
    """Mean of observed over i.i.d. switch rate, over non-intercept entries
    whose reference is at least ``min_reference``; NaN if there are none."""
    m = np.asarray(m_draws)
    ref = iid_switch_reference(m.mean(axis=0))[:, 1:]
    s = switch_rates(m)[:, 1:]
    keep = ref >= min_reference
    if not keep.any():
        return float("nan")
    return float(np.mean(s[keep] / ref[keep]))


@dataclass
class AgreementReport:
    max_abs_diff: float
    rms_diff: float
    pairs: np.ndarray  # rows of (row, col, a, b)


def chain_agreement(mhat_a: np.ndarray, mhat_b: np.ndarray) -> AgreementReport:
    a = np.asarray(mhat_a, dtype=float)
    b = np.asarray(mhat_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = np.abs(a - b)
    return AgreementReport(float(d.max()), float(np.sqrt(np.mean(d ** 2))), scatter_pairs(a, b))


def scatter_pairs(x: np.ndarray, y: np.ndarray, skip_intercept: bool = True) -> np.ndarray:
    """(row, col, x, y) for every entry; rows and columns are 1-based classes
    and 0-based predictor columns."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c, P = x.shape
    start = 1 if skip_intercept else 0
    rows = [(j + 1, k, x[j, k], y[j, k]) for j in range(c) for k in range(start, P)]
    return np.array(rows, dtype=float).reshape(-1, 4)


def write_scatter(path, pairs: np.ndarray):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "x", "y"])
        for r, k, x, y in pairs:
            w.writerow([int(r), int(k), f"{x:.17g}", f"{y:.17g}"])


def misclassification_rate(predictions, truth) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError("predictions and truth differ in length")
    if truth.size == 0:
        raise ValueError("nothing to score")
    return float(np.mean(predictions != truth))


def confusion_matrix(predictions, truth, n_classes: int | None = None) -> np.ndarray:
    """Counts with rows indexed by true class and columns by prediction."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise ValueError("predictions and truth differ in length")
    k = n_classes or int(max(predictions.max(initial=0), truth.max(initial=0)) + 1)
    out = np.zeros((k, k), dtype=np.int64)
    np.add.at(out, (truth, predictions), 1)
    return out
