"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Both backends are imported
directly, so the result does not depend on ``CARTOMDP_PURE_PYTHON``.
"""
from __future__ import annotations

import argparse
import random
import timeit

import numpy as np

from cartomdp import _pykernels as py
from cartomdp.optimize import UPPER, build_problem
from cartomdp.random_models import random_mdp
from cartomdp.analysis import ssp_solve
from cartomdp.unfold import hat, unfold

try:
    from cartomdp import _ckernels as cy
except ImportError:  # pragma: no cover
    cy = None


def minplus_case(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.integers(-5, 6, size=(n, n)).astype(np.int64)
    a[rng.random((n, n)) < 0.5] = py.INF
    return a, a.copy()


def tree_case(depth: int, seed: int = 0):
    # the bushiest of a few seeded models, so the sweep has real work to do
    best = None
    for k in range(20):
        mdp = random_mdp(random.Random(seed + k), n_states=6, max_actions=3, weight_range=(0, 2))
        tree = unfold(mdp, depth)
        if best is None or len(tree) > len(best[1]):
            best = (mdp, tree)
    mdp, tree = best
    problem = build_problem(hat(tree, ssp_solve(mdp)), 1, 3, UPPER)
    x = np.full(problem.n_vars, 0.5)
    return problem, x


def bench(label, fn, repeat):
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {label:8s} {t * 1e3:9.3f} ms")
    return t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; only the fallback is available")
    for n in (32, 64, 128):
        a, b = minplus_case(n)
        print(f"min-plus product, {n}x{n}")
        tp = bench("python", lambda: py.minplus_matmul(a, b), args.repeat)
        if cy is not None:
            assert np.array_equal(py.minplus_matmul(a, b), cy.minplus_matmul(a, b))
            tc = bench("cython", lambda: cy.minplus_matmul(a, b), args.repeat)
            print(f"  speed-up {tp / tc:.1f}x")
    for depth in (3, 4, 5):
        problem, x = tree_case(depth)
        arrays = problem._arrays
        lp, lq = problem._leaf_pf, problem._leaf_qf
        print(f"tree sweep, depth {depth} ({len(problem.tree)} nodes, {problem.n_vars} vars)")
        tp = bench("python", lambda: py.tree_eval_grad(*arrays, x, lp, lq), args.repeat)
        if cy is not None:
            ref, got = py.tree_eval_grad(*arrays, x, lp, lq), cy.tree_eval_grad(*arrays, x, lp, lq)
            assert np.allclose(ref[2], got[2]) and np.allclose(ref[3], got[3])
            tc = bench("cython", lambda: cy.tree_eval_grad(*arrays, x, lp, lq), args.repeat)
            print(f"  speed-up {tp / tc:.1f}x")


if __name__ == "__main__":
    main()
