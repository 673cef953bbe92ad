"""The numba loop kernels and the vectorized numpy kernels must agree."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from domadapt import kernels
from domadapt._accel import HAVE_NUMBA
from domadapt.core import RandomStream

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 12), st.integers(1, 5))
def test_sq_dists_agree(seed, n, m, d):
    r = RandomStream(seed)
    a, b = r.normal((n, d)), r.normal((m, d))
    assert np.allclose(kernels.sq_dists_numba(a, b), kernels.sq_dists_numpy(a, b),
                       rtol=1e-10, atol=1e-10)


def test_sinkhorn_agree():
    r = RandomStream(1)
    x, y = r.normal((9, 2)), r.normal((7, 2)) + 0.5
    cost = kernels.sq_dists_numpy(x, y)
    cost /= cost.max()
    la, lb = np.full(9, -math.log(9)), np.full(7, -math.log(7))
    fa, ga, sa, va = kernels.sinkhorn_log_numba(cost, 0.1, la, lb, 5000, 1e-12)
    fb, gb, sb, vb = kernels.sinkhorn_log_numpy(cost, 0.1, la, lb, 5000, 1e-12)
    assert abs(sa - sb) <= 1
    assert va < 1e-12 and vb < 1e-12
    assert np.allclose(fa, fb, atol=1e-9) and np.allclose(ga, gb, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 3, 5]))
def test_knn_agree(seed, k):
    r = RandomStream(seed)
    train = np.round(r.normal((15, 2)), 1)  # rounding makes distance ties common
    test = np.round(r.normal((8, 2)), 1)
    labels = (r.permutation(15) % 3).astype(np.int64)
    assert np.array_equal(kernels.knn_predict_numba(train, labels, test, k, 3),
                          kernels.knn_predict_numpy(train, labels, test, k, 3))


def test_conditional_p_agree():
    x = RandomStream(2).normal((30, 4))
    d2 = kernels.sq_dists_numpy(x, x)
    np.fill_diagonal(d2, 0.0)
    pa, perp_a = kernels.conditional_p_numba(d2, 7.0, 1e-5, 50)
    pb, perp_b = kernels.conditional_p_numpy(d2, 7.0, 1e-5, 50)
    assert np.allclose(pa, pb, atol=1e-10)
    assert np.allclose(perp_a, perp_b, atol=1e-8)


def test_tsne_grad_agree():
    r = RandomStream(3)
    y = r.normal((12, 2))
    p = r.uniform((12, 12))
    p = p + p.T
    np.fill_diagonal(p, 0.0)
    p /= p.sum()
    assert np.allclose(kernels.tsne_grad_numba(y, p), kernels.tsne_grad_numpy(y, p),
                       rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("h", [0.0, 0.7])
def test_itl_objective_agree(h):
    r = RandomStream(4)
    x = r.normal((20, 4))
    w = np.linalg.qr(r.normal((4, 2)))[0]
    is_src = np.arange(20) < 12
    cls = np.where(is_src, np.arange(20) % 3, -1).astype(np.int64)
    for lam in (0.0, 1.0, 2.5):
        a = kernels.itl_objective_numba(x, np.ascontiguousarray(w), is_src, cls, 3, lam, h)
        b = kernels.itl_objective_numpy(x, w, is_src, cls, 3, lam, h)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_env_flag_selects_numpy_backend():
    code = ("from domadapt import kernels, _accel;"
            "print(_accel.backend_name(), kernels.sq_dists is kernels.sq_dists_numpy,"
            " kernels.warmup())")
    env = dict(os.environ, DOMADAPT_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out == ["numpy", "True", "0.0"]
