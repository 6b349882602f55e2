"""Command-line entry point: ``csps simulate|fit|predict|cv|diagnose|screen``.

Exit codes: 0 success, 1 validation error (bad config, data or arguments),
2 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import data as dmod
from .artifacts import FittedModel, _write_rows, write_fit, write_matrix
from .diagnostics import (chain_agreement, iid_switch_reference, scatter_pairs, switch_rate_se,
                          switch_rates, write_scatter)
from .estimators import predict_classes, predictive_distribution
from .pipeline import cross_validate, fit_dataset, load_dataset, screen

log = logging.getLogger("csps")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> dict:
    return cfgmod.load_config(args.config, args.set)


def cmd_simulate(args) -> int:
    if args.scenario not in dmod.SCENARIOS:
        raise cfgmod.ConfigError(f"unknown scenario {args.scenario}; choose from "
                                 f"{sorted(dmod.SCENARIOS)}")
    ds, beta = dmod.SCENARIOS[args.scenario](args.seed)
    out = _out_dir(args.out)
    dmod.write_csv(out / "dataset.csv", ds)
    write_matrix(out / "true_beta.csv", beta, [str(x) for x in ds.label_map.labels[1:]],
                 ["intercept"] + list(ds.feature_names))
    log.info("wrote %d rows to %s", ds.n, out)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    raw, _ = load_dataset(cfg)
    fit = fit_dataset(raw, cfg)
    out = _out_dir(cfg["output"]["directory"])
    write_fit(out, fit, cfg, emit_draws=cfg["output"]["emit_draws"])
    if cfg["sampler"]["chains"] >= 2:
        log.info("chain agreement: max |diff| = %.4f", fit.agreement.max_abs_diff)
        if fit.agreement.max_abs_diff >= 0.05:
            warnings.warn(f"chains disagree (max |diff| = {fit.agreement.max_abs_diff:.3f}); "
                          "consider longer runs")
    log.info("fit artifacts in %s (%.1f s)", out, fit.wall_time)
    return EXIT_OK


def cmd_predict(args) -> int:
    fm = FittedModel(args.fit_dir)
    label_column = fm.meta["config"]["data"]["label_column"]
    X, _ = dmod.read_predictors(args.input, fm.raw_feature_names, label_column)
    raw = dmod.Dataset.from_arrays(X, [fm.label_map.reference] * X.shape[0],
                                   names=fm.raw_feature_names, label_map=fm.label_map)
    ds = fm.preprocessor().transform(raw)
    if ds.p != fm.p:
        raise dmod.DataError(f"transformed input has {ds.p} features, fit expects {fm.p}")
    probs = predictive_distribution(fm.as_output(), ds.design)
    modal = fm.label_map.decode(predict_classes(probs))
    labels = [str(x) for x in fm.label_map.labels]
    rows = [[i] + [float(v) for v in pr] + [lab] for i, (pr, lab) in enumerate(zip(probs, modal))]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, ["unit"] + [f"p_{lab}" for lab in labels] + ["predicted"], rows)
    log.info("wrote %d predictions to %s", len(rows), out)
    return EXIT_OK


def cmd_cv(args) -> int:
    cfg = _config(args)
    raw, _ = load_dataset(cfg)
    res = cross_validate(raw, cfg)
    out = _out_dir(cfg["output"]["directory"])
    _write_rows(out / "cv_folds.csv", ["split", "n_train", "n_test", "errors", "correct", "rate"],
                [[f["split"], f["n_train"], f["n_test"], f["errors"], f["correct"], f["rate"]]
                 for f in res.folds])
    lm = raw.label_map
    tcp = res.true_class_probability
    _write_rows(out / "cv_units.csv",
                ["unit", "split", "truth", "predicted", "p_true"]
                + [f"p_{lab}" for lab in lm.labels],
                [[int(u), int(s), lm.labels[t], lm.labels[pdx], float(pt)]
                 + [float(v) for v in pr]
                 for u, s, t, pdx, pt, pr in zip(res.unit_index, res.split_of_unit, res.truth,
                                                 res.predicted, tcp, res.probs)])
    summary = {
        "mode": res.mode,
        "n_splits": len(res.folds),
        "misclassification": res.misclassification,
        "labels": [str(x) for x in lm.labels],
        "confusion": res.confusion(lm.c + 1).tolist(),
        "config": cfg,
    }
    with (out / "cv_summary.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    log.info("overall misclassification %.4f over %d splits", res.misclassification,
             len(res.folds))
    print(f"misclassification: {res.misclassification:.6f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    fm = FittedModel(args.fit_dir)
    chains = fm.m_draws()
    if not chains:
        raise FileNotFoundError(f"no indicator draws in {fm.directory}; refit with "
                                "output.emit_draws: true")
    out = _out_dir(args.out or fm.directory)
    rows = []
    for ci, m in enumerate(chains):
        if m.shape[0] < 2:
            raise ValueError(f"chain {ci} has fewer than two draws")
        mhat = m.mean(axis=0)
        ref = iid_switch_reference(mhat)
        s = switch_rates(m)
        se = switch_rate_se(ref, m.shape[0])
        for r, k, x, y in scatter_pairs(ref, s):
            j, k = int(r) - 1, int(k)
            rows.append([ci, int(r), k, float(mhat[j, k]), float(x), float(y), float(se[j, k])])
    _write_rows(out / "switch_rates.csv",
                ["chain", "row", "col", "inclusion", "iid_reference", "switch_rate", "se"], rows)
    if len(chains) < 2:
        warnings.warn("single chain: chain-agreement scatter skipped")
    else:
        rep = chain_agreement(inclusion_probabilities_of(chains[0]),
                              inclusion_probabilities_of(chains[1]))
        write_scatter(out / "agreement.csv", rep.pairs)
        log.info("chain agreement: max |diff| = %.4f", rep.max_abs_diff)
    return EXIT_OK


def inclusion_probabilities_of(m_draws: np.ndarray) -> np.ndarray:
    return np.asarray(m_draws, dtype=float).mean(axis=0)


def cmd_screen(args) -> int:
    cfg = _config(args)
    raw, _ = load_dataset(cfg)
    res = screen(raw, cfg)
    out = _out_dir(cfg["output"]["directory"])
    classes = [str(x) for x in raw.label_map.labels[1:]]
    keep = set(res.retained.tolist())
    diff = res.difference
    _write_rows(out / "screen.csv",
                ["feature"] + [f"inclusion_{c}" for c in classes] + ["retained", "difference"],
                [[nm] + [float(v) for v in res.inclusion[k]] + [int(k in keep), float(diff[k])]
                 for k, nm in enumerate(res.names)])
    (out / "retained.txt").write_text("".join(f"{res.names[k]}\n" for k in res.retained),
                                      encoding="utf-8")
    log.info("retained %d of %d predictors", len(keep), raw.p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csps", description="Multinomial probit with "
                                "class-specific predictor selection.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic scenario dataset")
    s.add_argument("--scenario", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    for name, func, hlp in (("fit", cmd_fit, "run the sampler and write fit artifacts"),
                            ("cv", cmd_cv, "cross-validated misclassification"),
                            ("screen", cmd_screen, "univariate screening fits")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", help="YAML run configuration")
        s.add_argument("--set", action="append", default=[], metavar="BLOCK.KEY=VALUE",
                       help="override a config key (repeatable)")
        s.set_defaults(func=func)

    s = sub.add_parser("predict", help="class probabilities for new data")
    s.add_argument("--fit-dir", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True, help="output CSV path")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("diagnose", help="switch-rate and agreement scatter data")
    s.add_argument("--fit-dir", required=True)
    s.add_argument("--out", help="output directory (default: the fit directory)")
    s.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        # LinAlgError subclasses ValueError, so it is caught first
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, FileNotFoundError, KeyError) as exc:
        # ConfigError and DataError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
