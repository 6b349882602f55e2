import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csps import config as cfgmod
from csps.artifacts import FittedModel, read_matrix, write_fit, write_matrix
from csps.data import format_number, simulate_scenario1
from csps.estimators import predictive_distribution
from csps.pipeline import fit_dataset


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    raw, _ = simulate_scenario1(3)
    out = tmp_path_factory.mktemp("art")
    cfg = cfgmod.load_config(None, ["data.scenario=1", "data.rbf.n_knots=5",
                                    "sampler.iterations=80", "sampler.burn_in=10",
                                    "sampler.chains=2", "sampler.seeds=[3, 4]",
                                    f"output.directory={out}"])
    fit = fit_dataset(raw, cfg, workers=1)
    write_fit(out, fit, cfg)
    return raw, fit, out


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=True))
def test_number_format_round_trips(x):
    assert float(format_number(x)) == x


def test_matrix_round_trip(tmp_path, rng):
    a = rng.normal(size=(3, 5)) * 10.0 ** rng.integers(-12, 12, size=(3, 5))
    write_matrix(tmp_path / "m.csv", a, ["a", "b", "c"], list("vwxyz"))
    b, classes, cols = read_matrix(tmp_path / "m.csv")
    np.testing.assert_array_equal(a, b)
    assert classes == ["a", "b", "c"] and cols == list("vwxyz")


def test_draws_round_trip(fitted):
    _, fit, out = fitted
    fm = FittedModel(out)
    pooled = np.concatenate([o.beta_draws for o in fit.outputs])
    np.testing.assert_array_equal(fm.beta_draws(), pooled)
    for a, b in zip(fm.m_draws(), fit.outputs):
        np.testing.assert_array_equal(a, b.m_draws)
    inc, _, _ = read_matrix(out / "inclusion.csv")
    np.testing.assert_array_equal(inc, fit.inclusion)


def test_preprocessor_round_trip(fitted):
    raw, fit, out = fitted
    pre = FittedModel(out).preprocessor()
    a = fit.preprocessor.transform(raw).design
    b = pre.transform(raw).design
    np.testing.assert_array_equal(a, b)
    assert b.shape[1] == 6


def test_prediction_matches_in_memory(fitted):
    raw, fit, out = fitted
    fm = FittedModel(out)
    ds = fm.preprocessor().transform(raw)
    np.testing.assert_array_equal(predictive_distribution(fm.as_output(), ds.design),
                                  fit.predict(raw))


def test_metadata_fields(fitted):
    _, fit, out = fitted
    fm = FittedModel(out)
    assert fm.raw_feature_names == list(fitted[0].feature_names)
    assert fm.meta["seeds"] == [3, 4] and fm.c == 5 and fm.p == 5
    assert len(fm.meta["mu"]) == 6
