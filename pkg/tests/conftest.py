import numpy as np
import pytest

from csps.data import Dataset
from csps.model import LabelMap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(X, y, c):
    """Dataset with integer labels 0..c and covariates X (no intercept)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    design = np.column_stack([np.ones(X.shape[0]), X])
    return Dataset(design, np.asarray(y, dtype=np.int64), LabelMap(list(range(c + 1))))


def empty_dataset(c, p):
    return Dataset(np.ones((0, p + 1)), np.zeros(0, dtype=np.int64), LabelMap(list(range(c + 1))))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
