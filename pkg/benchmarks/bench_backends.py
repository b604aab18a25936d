"""Benchmark the numba kernels against their pure-numpy twins.

The hot loop is one exponential-midpoint step: assemble H(t), eigh, rotate.
System sizes here are the ones the protocols actually use (7-site transfer
chain, 10-site braid junction, 23-site memory system).

Run:  python benchmarks/bench_backends.py [--steps 4000]
"""

import argparse
import time

import numpy as np

from matryoshka._backend import NUMBA_AVAILABLE
from matryoshka._kernels import _propagate_py

if NUMBA_AVAILABLE:
    from matryoshka._kernels import _propagate_nb


def chain_tables(n, nsteps, seed=0):
    rng = np.random.default_rng(seed)
    pairs = [(i, i + 1) for i in range(n - 1)]
    bi = np.array([p[0] for p in pairs], np.int64)
    bj = np.array([p[1] for p in pairs], np.int64)
    s = np.linspace(0, np.pi / 2, nsteps)
    bond_vals = np.sin(s)[:, None] * rng.uniform(0.3, 1.0, len(pairs))[None, :]
    diag = np.zeros((nsteps, n))
    psi0 = np.zeros(n, complex)
    psi0[0] = 1.0
    return bi, bj, bond_vals, diag, psi0


def run(fn, args, repeats):
    fn(*args)  # warmup / JIT
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(f"{'n sites':>8} {'steps':>7} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for n in (7, 10, 23, 80):
        bi, bj, bv, dv, psi0 = chain_tables(n, args.steps)
        call = (bi, bj, bv, dv, psi0, 0.05, args.steps)
        t_py = run(_propagate_py, call, args.repeats)
        if NUMBA_AVAILABLE:
            t_nb = run(_propagate_nb, call, args.repeats)
            a = _propagate_py(*call)
            b = _propagate_nb(*call)
            assert np.abs(a - b).max() < 1e-10, "backends disagree"
            print(f"{n:>8} {args.steps:>7} {t_py:>10.3f} s {t_nb:>10.3f} s "
                  f"{t_py / t_nb:>8.1f}x")
        else:
            print(f"{n:>8} {args.steps:>7} {t_py:>10.3f} s {'-':>12} {'-':>9}")
    if not NUMBA_AVAILABLE:
        print("numba backend unavailable (or disabled via MATRYOSHKA_BACKEND)")


if __name__ == "__main__":
    main()
