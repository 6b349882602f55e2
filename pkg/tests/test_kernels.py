import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest, truncnorm

from csps import _fallback, kernels
from csps.data import simulate_scenario1
from csps.model import Hyperparameters
from csps.sampler import ChainConfig, initial_state

try:
    from csps import _kernels
except ImportError:
    _kernels = None

BACKENDS = [_fallback] + ([_kernels] if _kernels is not None else [])
compiled = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestTruncatedNormal:
    @pytest.mark.parametrize("lo,hi", [(-math.inf, 0.0), (0.0, math.inf), (-0.5, 1.5),
                                       (3.0, math.inf), (-math.inf, -4.0), (8.0, 9.0)])
    def test_ks_against_reference(self, mod, lo, hi):
        rng = np.random.default_rng(3)
        mean, sd = 0.4, 1.3
        u = 1.0 - rng.random(4000)
        x = np.array([mod.truncnorm_draw(mean, sd, lo, hi, ui) for ui in u])
        a, b = (lo - mean) / sd, (hi - mean) / sd
        assert kstest(x, truncnorm(a, b, loc=mean, scale=sd).cdf).pvalue > 1e-3

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50), st.floats(0.01, 10), st.floats(-60, 60), st.floats(0, 20),
           st.floats(1e-300, 1.0))
    def test_draw_inside_bounds(self, mod, mean, sd, lo, width, u):
        x = mod.truncnorm_draw(mean, sd, lo, lo + width, u)
        assert lo <= x <= lo + width and math.isfinite(x)

    def test_far_tail_is_finite(self, mod):
        x = mod.truncnorm_draw(0.0, 1.0, 40.0, math.inf, 0.5)
        assert 40.0 <= x < 41.0
        y = mod.truncnorm_draw(0.0, 1.0, -math.inf, -40.0, 0.5)
        assert -41.0 < y <= -40.0


@compiled
class TestBackendParity:
    @settings(max_examples=300, deadline=None)
    @given(st.floats(-30, 30), st.floats(0.05, 5), st.floats(-30, 30), st.floats(0.01, 10),
           st.floats(1e-12, 1.0))
    def test_truncnorm_identical(self, mean, sd, lo, width, u):
        a = _fallback.truncnorm_draw(mean, sd, lo, lo + width, u)
        b = _kernels.truncnorm_draw(mean, sd, lo, lo + width, u)
        assert a == pytest.approx(b, rel=1e-13, abs=1e-13)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["empty", "full", "random"]))
    def test_latent_sweep_identical(self, seed, start):
        ds, _ = simulate_scenario1(seed % 1000, n=40)
        hp = Hyperparameters.default(ds.c, ds.p)
        rng = np.random.default_rng(seed)
        st_ = initial_state(ds, ChainConfig(hp, start=start), rng)
        cc = st_.caches
        U = 1.0 - rng.random(st_.Z.shape)
        y = np.ascontiguousarray(ds.labels)
        out = []
        for mod in (_fallback, _kernels):
            Z, mt = st_.Z.copy(), cc.mt.copy()
            mod.latent_sweep(Z, y, cc.Xa, cc.S, mt, cc.m, cc.H, U, 1e-12)
            out.append((Z, mt))
        np.testing.assert_allclose(out[0][0], out[1][0], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(out[0][1], out[1][1], rtol=1e-11, atol=1e-11)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(2, 8))
    def test_log_marginal_identical(self, seed, n, P):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, P))
        X[:, 0] = 1
        G = X.T @ X
        z = rng.normal(size=n)
        mu = rng.normal(size=P)
        idx = np.flatnonzero(np.r_[1, rng.integers(0, 2, P - 1)]).astype(np.int64)
        v = 4.0 / idx.size
        args = (G, np.ascontiguousarray(X.T @ z), float(z @ z), n, mu, idx, v)
        assert _kernels.log_marginal_gram(*args) == pytest.approx(
            _fallback.log_marginal_gram(*args), rel=1e-12, abs=1e-10)

    def test_log_marginal_not_positive_definite(self):
        G = -np.eye(2) * 10
        with pytest.raises(ArithmeticError):
            _kernels.log_marginal_gram(G, np.zeros(2), 0.0, 1, np.zeros(2),
                                       np.arange(2, dtype=np.int64), 1.0)


def test_sweep_rejects_unit_leverage():
    Z = np.array([[-0.5]])
    with pytest.raises(ArithmeticError):
        _fallback.latent_sweep(Z, np.zeros(1, dtype=np.int64), np.ones((1, 1, 1)),
                               np.ones((1, 1, 1)), np.zeros((1, 1)),
                               np.ones(1, dtype=np.int64), np.ones((1, 1)),
                               np.full((1, 1), 0.5), 1e-12)


def test_backend_selection_env():
    code = "from csps import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, CSPS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    if _kernels is not None:
        assert kernels.BACKEND == "cython" or os.environ.get("CSPS_PURE_PYTHON")
