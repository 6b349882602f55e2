"""End-to-end fitting, prediction, cross-validation and screening.

These functions take a validated config dict (see :mod:`csps.config`) and
are what the command-line interface drives.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as dmod
from .data import Dataset, RbfConfig, Standardization
from .diagnostics import AgreementReport, chain_agreement, confusion_matrix, misclassification_rate
from .estimators import (conditional_beta_estimate, inclusion_probabilities,
                         median_probability_model, posterior_mean_beta,
                         predict_classes, predictive_distribution)
from .model import Hyperparameters, default_intercept_mean, full_indicator
from .sampler import ChainConfig, ChainOutput, run_chains


def derived_seed(base: int, *salt: int) -> int:
    """Deterministic child seed for a (base, salt...) combination."""
    return int(np.random.SeedSequence([int(base), *map(int, salt)]).generate_state(1)[0])


@dataclass
class Preprocessor:
    """Covariate transforms learned on training data only."""

    standardization: Standardization | None = None
    rbf: RbfConfig | None = None

    def transform(self, ds: Dataset) -> Dataset:
        if self.standardization is not None:
            ds = dmod.apply_standardization(ds, self.standardization)
        if self.rbf is not None:
            ds = _apply_rbf(ds, self.rbf)
        return ds


def prepare(train: Dataset, data_cfg: dict, salt: int = 0) -> tuple[Dataset, Preprocessor]:
    pre = Preprocessor()
    if data_cfg.get("standardize", True):
        train, pre.standardization = dmod.standardize(train)
    rbf = data_cfg.get("rbf")
    if rbf:
        rng = np.random.default_rng(derived_seed(rbf["seed"], salt))
        pre.rbf = dmod.fit_rbf(train.covariates, int(rbf["n_knots"]), rng,
                               float(rbf["bandwidth"]))
        train = _apply_rbf(train, pre.rbf)
    return train, pre


def _apply_rbf(ds: Dataset, rbf: RbfConfig) -> Dataset:
    feats = dmod.rbf_features(ds.covariates, rbf)
    return ds.with_covariates(feats, [f"rbf{k}" for k in range(1, feats.shape[1] + 1)])


def build_hyperparameters(model_cfg: dict, c: int, p: int) -> Hyperparameters:
    if model_cfg.get("c") is not None and int(model_cfg["c"]) != c:
        raise ValueError(f"config declares c={model_cfg['c']} but the data have c={c}")
    if model_cfg.get("mu") is not None:
        mu = np.asarray(model_cfg["mu"], dtype=float)
        if mu.size != p + 1:
            raise ValueError(f"model.mu must have length p+1 = {p + 1}")
    else:
        mu = np.zeros(p + 1)
        mu0 = model_cfg.get("mu0")
        mu[0] = default_intercept_mean(c) if mu0 is None else float(mu0)
    return Hyperparameters(mu=mu, tau2=model_cfg["tau2"], rho=model_cfg["rho"],
                           gamma1=model_cfg["gamma1"], gamma2=model_cfg["gamma2"])


def chain_config(cfg: dict, hp: Hyperparameters, c: int) -> ChainConfig:
    s = cfg["sampler"]
    nops = s["selection"] == "nops"
    return ChainConfig(hp, iterations=s["iterations"], burn_in=s["burn_in"], thin=s["thin"],
                       seed=s["seeds"][0], q_proposal_scale=s["q_proposal_scale"],
                       start=s["starts"][0], fix_indicators=nops,
                       initial_indicator=full_indicator(c, hp.p) if nops else None)


@dataclass
class FitResult:
    dataset: Dataset
    preprocessor: Preprocessor
    hp: Hyperparameters
    outputs: list[ChainOutput]
    seeds: list[int]
    starts: list[str]
    wall_time: float
    inclusion: np.ndarray = None
    beta_mean: np.ndarray = None
    median_model: np.ndarray = None
    beta_conditional: np.ndarray | None = None
    agreement: AgreementReport | None = None
    extras: dict = field(default_factory=dict)

    def predict(self, raw: Dataset) -> np.ndarray:
        ds = self.preprocessor.transform(raw)
        return predictive_distribution(self.outputs, ds.design)


def fit_dataset(raw: Dataset, cfg: dict, salt: int = 0, conditional: bool = True,
                workers: int | None = None) -> FitResult:
    t0 = time.perf_counter()
    ds, pre = prepare(raw, cfg["data"], salt)
    hp = build_hyperparameters(cfg["model"], ds.c, ds.p)
    base = chain_config(cfg, hp, ds.c)
    s = cfg["sampler"]
    seeds = s["seeds"] if salt == 0 else [derived_seed(x, salt) for x in s["seeds"]]
    outputs = run_chains(ds, base, n_chains=s["chains"], starts=s["starts"], seeds=seeds,
                         workers=s["workers"] if workers is None else workers)
    res = FitResult(ds, pre, hp, outputs, seeds, list(s["starts"]), 0.0)
    res.extras["raw_feature_names"] = list(raw.feature_names)
    res.inclusion = inclusion_probabilities(outputs)
    res.beta_mean = posterior_mean_beta(outputs)
    res.median_model = median_probability_model(res.inclusion)
    if conditional:
        res.beta_conditional = conditional_beta_estimate(
            ds, res.median_model, replace(base, seed=derived_seed(seeds[0], 1)))
    if len(outputs) >= 2:
        res.agreement = chain_agreement(inclusion_probabilities(outputs[0]),
                                        inclusion_probabilities(outputs[1]))
    res.wall_time = time.perf_counter() - t0
    return res


@dataclass
class CvResult:
    mode: str
    folds: list[dict]
    unit_index: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray
    probs: np.ndarray
    split_of_unit: np.ndarray

    @property
    def misclassification(self) -> float:
        return misclassification_rate(self.predicted, self.truth)

    @property
    def true_class_probability(self) -> np.ndarray:
        return self.probs[np.arange(self.truth.size), self.truth]

    def confusion(self, n_classes: int) -> np.ndarray:
        return confusion_matrix(self.predicted, self.truth, n_classes)


def make_splits(n: int, cv_cfg: dict):
    mode = cv_cfg["mode"]
    if mode == "kfold":
        return dmod.kfold_splits(n, int(cv_cfg["k"]), int(cv_cfg["seed"]))
    if mode == "loocv":
        return dmod.loocv_splits(n)
    return [dmod.train_test_split(n, float(cv_cfg["fraction"]), derived_seed(cv_cfg["seed"], r))
            for r in range(int(cv_cfg["count"]))]


def _fold_job(args):
    raw, cfg, f, train, test = args
    fit = fit_dataset(raw.subset(train), cfg, salt=f + 1, conditional=False, workers=1)
    probs = fit.predict(raw.subset(test))
    return f, probs


def cross_validate(raw: Dataset, cfg: dict) -> CvResult:
    """Split, fit on the training part, predict the held-out part, score.

    Preprocessing (standardization, RBF knots and constants) is learned on
    each training part only.
    """
    splits = make_splits(raw.n, cfg["cv"])
    jobs = [(raw, cfg, f, tr, te) for f, (tr, te) in enumerate(splits)]
    workers = cfg["sampler"]["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_fold_job, jobs))
    else:
        results = dict(map(_fold_job, jobs))
    folds, idx, truth, pred, probs, which = [], [], [], [], [], []
    for f, (tr, te) in enumerate(splits):
        pr = results[f]
        yh = predict_classes(pr)
        yt = raw.labels[te]
        folds.append({"split": f, "n_train": int(tr.size), "n_test": int(te.size),
                      "errors": int(np.sum(yh != yt)), "correct": int(np.sum(yh == yt)),
                      "rate": float(np.mean(yh != yt))})
        idx.append(te)
        truth.append(yt)
        pred.append(yh)
        probs.append(pr)
        which.append(np.full(te.size, f))
    return CvResult(cfg["cv"]["mode"], folds, np.concatenate(idx), np.concatenate(truth),
                    np.concatenate(pred), np.vstack(probs), np.concatenate(which))


@dataclass
class ScreenResult:
    names: list[str]
    inclusion: np.ndarray   # (p, c): per predictor, per non-reference class
    threshold: float

    @property
    def retained(self) -> np.ndarray:
        """Predictors whose inclusion exceeds the threshold for any class."""
        return np.flatnonzero((self.inclusion > self.threshold).any(axis=1))

    @property
    def difference(self) -> np.ndarray:
        """Class 1 minus class 2 inclusion (NaN when c < 2)."""
        if self.inclusion.shape[1] < 2:
            return np.full(self.inclusion.shape[0], np.nan)
        return self.inclusion[:, 0] - self.inclusion[:, 1]


def _screen_job(args):
    raw, cfg, k = args
    single = raw.with_covariates(raw.covariates[:, [k]], [raw.feature_names[k]])
    fit = fit_dataset(single, cfg, conditional=False, workers=1)
    return k, fit.inclusion[:, 1]


def screen(raw: Dataset, cfg: dict) -> ScreenResult:
    """One single-predictor fit per column of the data."""
    jobs = [(raw, cfg, k) for k in range(raw.p)]
    workers = cfg["sampler"]["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = dict(pool.map(_screen_job, jobs))
    else:
        res = dict(map(_screen_job, jobs))
    inc = np.vstack([res[k] for k in range(raw.p)])
    return ScreenResult(list(raw.feature_names), inc, float(cfg["screen"]["threshold"]))


def load_dataset(cfg: dict, label_map=None) -> tuple[Dataset, np.ndarray | None]:
    """Dataset named by the data block, plus the true beta for scenarios."""
    d = cfg["data"]
    if d["scenario"] is not None:
        ds, beta = dmod.SCENARIOS[int(d["scenario"])](int(d["seed"]))
        return ds, beta
    return dmod.load_csv(d["input"], d["label_column"], cfg["model"]["reference_class"],
                         label_map=label_map), None
