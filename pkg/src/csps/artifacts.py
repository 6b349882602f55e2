"""CSV/JSON artifacts written by ``fit`` and read back by ``predict`` and
``diagnose``.

Matrices indexed by (class, column) are written with one row per
non-reference class and one column per design column (intercept first).
Numbers carry 17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .data import RbfConfig, Standardization, format_number
from .model import LabelMap
from .pipeline import FitResult, Preprocessor
from .sampler import ChainOutput

MATRIX_FILES = {
    "inclusion": "inclusion.csv",
    "beta_mean": "beta_mean.csv",
    "median_model": "median_model.csv",
    "beta_conditional": "beta_conditional.csv",
}


def write_matrix(path, mat: np.ndarray, class_labels, columns):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["class"] + list(columns))
        for lab, row in zip(class_labels, np.asarray(mat)):
            w.writerow([lab] + [format_number(v) for v in row])


def read_matrix(path) -> tuple[np.ndarray, list, list]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    mat = np.array([[float(v) for v in r[1:]] for r in body])
    return mat, [r[0] for r in body], header[1:]


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([format_number(v) if isinstance(v, float) else v for v in r])


def _read_rows(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_fit(directory, fit: FitResult, config: dict, emit_draws: bool = True) -> dict:
    """Write every fit artifact; returns the metadata dict."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    ds = fit.dataset
    classes = [str(x) for x in ds.label_map.labels[1:]]
    columns = ["intercept"] + list(ds.feature_names)
    for key, fname in MATRIX_FILES.items():
        mat = getattr(fit, key)
        if mat is not None:
            write_matrix(out / fname, mat, classes, columns)
    flat_cols = [f"{cl}:{col}" for cl in classes for col in columns]
    _write_rows(out / "q_trace.csv", ["chain", "draw", "q"],
                [(ci, t, float(q)) for ci, o in enumerate(fit.outputs)
                 for t, q in enumerate(o.q_draws)])
    if emit_draws:
        for ci, o in enumerate(fit.outputs):
            _write_rows(out / f"m_draws_chain{ci}.csv", flat_cols,
                        (r.tolist() for r in o.m_draws.reshape(len(o), -1)))
        _write_rows(out / "beta_draws.csv", ["chain", "draw"] + flat_cols,
                    ([ci, t] + [float(v) for v in b.ravel()]
                     for ci, o in enumerate(fit.outputs) for t, b in enumerate(o.beta_draws)))
    pre = fit.preprocessor
    if pre.standardization is not None:
        _write_rows(out / "standardization.csv", ["feature", "shift", "scale"],
                    [(n, float(a), float(b)) for n, a, b in
                     zip(_raw_names(fit, config), pre.standardization.shift,
                         pre.standardization.scale)])
    if pre.rbf is not None:
        d = pre.rbf.knots.shape[1]
        _write_rows(out / "rbf_knots.csv", [f"v{k}" for k in range(1, d + 1)] + ["a", "b"],
                    ([float(v) for v in knot] + [float(a), float(b)]
                     for knot, a, b in zip(pre.rbf.knots, pre.rbf.a, pre.rbf.b)))
    if fit.agreement is not None:
        from .diagnostics import write_scatter
        write_scatter(out / "agreement.csv", fit.agreement.pairs)
    meta = {
        "config": config,
        "label_map": [str(x) for x in ds.label_map.labels],
        "feature_names": list(ds.feature_names),
        "raw_feature_names": _raw_names(fit, config),
        "c": ds.c,
        "p": ds.p,
        "seeds": [int(s) for s in fit.seeds],
        "starts": fit.starts,
        "n_draws_per_chain": [len(o) for o in fit.outputs],
        "acceptance_rates": [o.acceptance_rates.tolist() for o in fit.outputs],
        "q_acceptance_rates": [o.q_acceptance_rate for o in fit.outputs],
        "variance_floor_hits": [int(o.floor_hits) for o in fit.outputs],
        "rbf_bandwidth": None if pre.rbf is None else float(pre.rbf.bandwidth),
        "mu": fit.hp.mu.tolist(),
        "wall_time_seconds": fit.wall_time,
    }
    if fit.agreement is not None:
        meta["agreement"] = {"max_abs_diff": fit.agreement.max_abs_diff,
                             "rms_diff": fit.agreement.rms_diff}
    meta.update(fit.extras)
    with (out / "metadata.json").open("w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=_json_default)
    return meta


def _raw_names(fit: FitResult, config: dict):
    return list(fit.extras.get("raw_feature_names", fit.dataset.feature_names))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


class FittedModel:
    """Artifacts of a previous ``fit`` sufficient for prediction and diagnostics."""

    def __init__(self, directory):
        self.directory = Path(directory)
        meta_path = self.directory / "metadata.json"
        if not meta_path.exists():
            raise FileNotFoundError(f"{meta_path} not found; is this a fit output directory?")
        with meta_path.open(encoding="utf-8") as fh:
            self.meta = json.load(fh)
        self.label_map = LabelMap(list(self.meta["label_map"]))
        self.c = int(self.meta["c"])
        self.p = int(self.meta["p"])

    @property
    def raw_feature_names(self) -> list[str]:
        return list(self.meta["raw_feature_names"])

    def preprocessor(self) -> Preprocessor:
        pre = Preprocessor()
        sp = self.directory / "standardization.csv"
        if sp.exists():
            _, rows = _read_rows(sp)
            pre.standardization = Standardization(np.array([float(r[1]) for r in rows]),
                                                  np.array([float(r[2]) for r in rows]))
        rp = self.directory / "rbf_knots.csv"
        if rp.exists():
            _, rows = _read_rows(rp)
            arr = np.array([[float(v) for v in r] for r in rows])
            pre.rbf = RbfConfig(arr[:, :-2], float(self.meta["rbf_bandwidth"]),
                                arr[:, -2], arr[:, -1])
        return pre

    def beta_draws(self) -> np.ndarray:
        path = self.directory / "beta_draws.csv"
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; refit with output.emit_draws: true")
        _, rows = _read_rows(path)
        flat = np.array([[float(v) for v in r[2:]] for r in rows])
        return flat.reshape(len(rows), self.c, self.p + 1)

    def m_draws(self) -> list[np.ndarray]:
        out = []
        for path in sorted(self.directory.glob("m_draws_chain*.csv"),
                           key=lambda p: int(p.stem.replace("m_draws_chain", ""))):
            _, rows = _read_rows(path)
            out.append(np.array([[int(v) for v in r] for r in rows], dtype=np.int8)
                       .reshape(len(rows), self.c, self.p + 1))
        return out

    def as_output(self) -> ChainOutput:
        """Pooled beta draws wrapped for :func:`predictive_distribution`."""
        b = self.beta_draws()
        T = b.shape[0]
        return ChainOutput(np.zeros((T, self.c, self.p + 1), dtype=np.int8), np.zeros(T), b,
                           np.zeros(self.c), np.zeros(self.c), 0, 0)
