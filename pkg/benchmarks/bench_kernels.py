"""Compiled versus pure-Python kernels on a Scenario-1 sized problem.

Times the latent sweep, the Gram-route log marginal, and whole sampler
iterations under each backend, and checks that both backends give the same
numbers.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--iterations 200]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from csps import _fallback, kernels
from csps.data import simulate_scenario1
from csps.model import Hyperparameters
from csps.sampler import ChainConfig, initial_state, run_chain

try:
    from csps import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sweep_inputs(ds, hp, seed=0):
    rng = np.random.default_rng(seed)
    st = initial_state(ds, ChainConfig(hp, start="full"), rng)
    cc = st.caches
    U = 1.0 - rng.random(st.Z.shape)
    return st.Z, np.ascontiguousarray(ds.labels), cc, U


def bench_sweep(mod, Z0, y, cc, U, repeats):
    def run():
        # the sweep updates Z and the posterior means in place
        Z, mt = Z0.copy(), cc.mt.copy()
        mod.latent_sweep(Z, y, cc.Xa, cc.S, mt, cc.m, cc.H, U, 1e-12)
        return Z
    return best_of(run, repeats), run()


def bench_gram(mod, cc, Z, repeats, calls=200):
    XtZ = np.ascontiguousarray((cc.X.T @ Z).T)
    ztz = np.einsum("ij,ij->j", Z, Z)
    idx = np.arange(cc.X.shape[1], dtype=np.int64)
    v = cc.hp.tau2 / idx.size

    def run():
        out = 0.0
        for _ in range(calls):
            out = mod.log_marginal_gram(cc.G, XtZ[0], float(ztz[0]), Z.shape[0], cc.mu, idx, v)
        return out
    return best_of(run, repeats) / calls, run()


def bench_chain(mod, ds, hp, iterations):
    saved = kernels.latent_sweep, kernels.log_marginal_gram, kernels.truncnorm_draw
    kernels.latent_sweep = mod.latent_sweep
    kernels.log_marginal_gram = mod.log_marginal_gram
    kernels.truncnorm_draw = mod.truncnorm_draw
    try:
        cfg = ChainConfig(hp, iterations=iterations, burn_in=0, thin=1, seed=3)
        t0 = time.perf_counter()
        out = run_chain(ds, cfg)
        return (time.perf_counter() - t0) / iterations, out
    finally:
        kernels.latent_sweep, kernels.log_marginal_gram, kernels.truncnorm_draw = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--iterations", type=int, default=200)
    args = ap.parse_args(argv)

    ds, _ = simulate_scenario1(1)
    hp = Hyperparameters.default(ds.c, ds.p)
    Z0, y, cc, U = sweep_inputs(ds, hp)
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not importable; timing the fallback only")

    rows, results = [], {}
    for name, mod in backends:
        t_sweep, z = bench_sweep(mod, Z0, y, cc, U, args.repeats)
        t_gram, lm = bench_gram(mod, cc, Z0, args.repeats)
        t_iter, out = bench_chain(mod, ds, hp, args.iterations)
        results[name] = (z, lm, out)
        rows.append((name, t_sweep * 1e3, t_gram * 1e6, t_iter * 1e3))

    print(f"n={ds.n} c={ds.c} p={ds.p}  (best of {args.repeats})")
    print(f"{'backend':<8} {'sweep ms':>10} {'logmarg us':>11} {'iter ms':>9}")
    for name, a, b, c in rows:
        print(f"{name:<8} {a:10.3f} {b:11.2f} {c:9.3f}")
    if len(rows) == 2:
        py, cy = rows
        print(f"{'speedup':<8} {py[1] / cy[1]:10.1f}x {py[2] / cy[2]:10.1f}x {py[3] / cy[3]:8.1f}x")
        (zp, lp, op), (zc, lc, oc) = results["python"], results["cython"]
        print(f"max |dZ| after one sweep: {np.max(np.abs(zp - zc)):.3e}")
        print(f"|d log marginal|:         {abs(lp - lc):.3e}")
        print(f"chains identical:         {np.array_equal(op.m_draws, oc.m_draws)}")


if __name__ == "__main__":
    main()
