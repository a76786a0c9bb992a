import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomdp import _pykernels as py
from cartomdp import kernels
from cartomdp.analysis import ssp_solve
from cartomdp.optimize import LOWER, UPPER, build_problem
from cartomdp.random_models import random_mdp
from cartomdp.unfold import hat, unfold

try:
    from cartomdp import _ckernels as cy
except ImportError:  # pragma: no cover
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def test_backend_is_reported():
    assert kernels.KERNEL_BACKEND in ("cython", "python")


@given(st.integers(0, 10**6), st.integers(1, 12))
@settings(max_examples=50, deadline=None)
def test_minplus_reference(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.integers(-4, 5, size=(n, n)).astype(np.int64)
    b = rng.integers(-4, 5, size=(n, n)).astype(np.int64)
    a[rng.random((n, n)) < 0.4] = py.INF
    b[rng.random((n, n)) < 0.4] = py.INF
    ref = np.full((n, n), py.INF, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if a[i, k] < py.INF and b[k, j] < py.INF:
                    ref[i, j] = min(ref[i, j], a[i, k] + b[k, j])
    got = py.minplus_matmul(a, b)
    assert np.array_equal(np.minimum(got, py.INF), ref)
    if cy is not None:
        assert np.array_equal(np.minimum(cy.minplus_matmul(a, b), py.INF), ref)


@needs_ext
@given(st.integers(0, 10**6), st.integers(1, 4), st.sampled_from([UPPER, LOWER]))
@settings(max_examples=40, deadline=None)
def test_tree_sweep_backends_agree(seed, depth, variant):
    rng = random.Random(seed)
    m = random_mdp(rng, n_states=4, w2_range=(0, 2))
    problem = build_problem(hat(unfold(m, depth), ssp_solve(m)), 1, 50, variant)
    x = np.array([rng.random() for _ in range(problem.n_vars)])
    args = (*problem._arrays, x, problem._leaf_pf, problem._leaf_qf)
    a, b = py.tree_eval_grad(*args), cy.tree_eval_grad(*args)
    assert a[0] == pytest.approx(b[0]) and a[1] == pytest.approx(b[1])
    assert np.allclose(a[2], b[2]) and np.allclose(a[3], b[3])
