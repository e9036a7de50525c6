"""Backend parity and masking semantics of the hot kernels."""

import subprocess
import sys

import numpy as np
import pytest

from descnet.kernels import (
    BACKEND,
    conv_pool_backward,
    conv_pool_forward,
    kmeans_assign,
    kmeans_update,
    scatter_add_rows,
)
from descnet.kernels import reference

try:
    from descnet.kernels import jit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKENDS = [reference] + ([jit] if HAVE_NUMBA else [])


def _conv_case(rng, B=5, L=11, D=4, win=3, F=6):
    x = rng.normal(size=(B, L, D))
    w = rng.normal(size=(win, D, F)) * 0.3
    b = rng.normal(size=F) * 0.1
    valid = rng.integers(0, L + 1, size=B).astype(np.int64)
    return x, w, b, valid


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_conv_pool_masks_padding(impl):
    rng = np.random.default_rng(7)
    x, w, b, valid = _conv_case(rng)
    pooled, argmax = impl.conv_pool_forward(x, w, b, valid)
    # scribbling on the padded tail must not change the result
    x2 = x.copy()
    for i, v in enumerate(valid):
        x2[i, v:] = 1e6
    pooled2, argmax2 = impl.conv_pool_forward(x2, w, b, valid)
    np.testing.assert_array_equal(pooled, pooled2)
    np.testing.assert_array_equal(argmax, argmax2)
    # short inputs (valid < window) contribute exactly zero, flagged -1
    short = valid < w.shape[0]
    assert np.all(pooled[short] == 0.0)
    assert np.all(argmax[short] == -1)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_conv_pool_matches_bruteforce(impl):
    rng = np.random.default_rng(3)
    x, w, b, valid = _conv_case(rng, B=7, L=9, D=3, win=2, F=4)
    pooled, argmax = impl.conv_pool_forward(x, w, b, valid)
    win = w.shape[0]
    for i in range(x.shape[0]):
        for f in range(w.shape[2]):
            zs = [
                sum(x[i, t + u, d] * w[u, d, f] for u in range(win) for d in range(x.shape[2]))
                + b[f]
                for t in range(max(valid[i] - win + 1, 0))
            ]
            want = max([z for z in zs if True], default=-np.inf)
            if want > 0:
                assert pooled[i, f] == pytest.approx(want, rel=1e-12)
                assert zs[argmax[i, f]] == pytest.approx(want, rel=1e-12)
            else:
                assert pooled[i, f] == 0.0
                assert argmax[i, f] == -1


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")
def test_backend_parity_conv():
    rng = np.random.default_rng(11)
    x, w, b, valid = _conv_case(rng, B=16, L=20, D=8, win=4, F=12)
    p_ref, a_ref = reference.conv_pool_forward(x, w, b, valid)
    p_jit, a_jit = jit.conv_pool_forward(x, w, b, valid)
    np.testing.assert_allclose(p_ref, p_jit, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(a_ref, a_jit)

    g = rng.normal(size=p_ref.shape)
    outs_ref = reference.conv_pool_backward(x, w, g, a_ref)
    outs_jit = jit.conv_pool_backward(x, w, g, a_jit)
    for o_ref, o_jit in zip(outs_ref, outs_jit):
        np.testing.assert_allclose(o_ref, o_jit, rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")
def test_backend_parity_kmeans_and_scatter():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(60, 7))
    c = rng.normal(size=(9, 7))
    l_ref, d_ref = reference.kmeans_assign(x, c)
    l_jit, d_jit = jit.kmeans_assign(x, c)
    np.testing.assert_array_equal(l_ref, l_jit)
    np.testing.assert_allclose(d_ref, d_jit, rtol=1e-9, atol=1e-9)

    s_ref, n_ref = reference.kmeans_update(x, l_ref, 9)
    s_jit, n_jit = jit.kmeans_update(x, l_jit, 9)
    np.testing.assert_allclose(s_ref, s_jit, rtol=1e-12)
    np.testing.assert_array_equal(n_ref, n_jit)

    ids = rng.integers(0, 5, size=20).astype(np.int64)
    vals = rng.normal(size=(20, 3))
    out_ref = reference.scatter_add_rows(np.zeros((5, 3)), ids, vals)
    out_jit = jit.scatter_add_rows(np.zeros((5, 3)), ids, vals)
    np.testing.assert_allclose(out_ref, out_jit, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_kmeans_assign_tie_breaks_low(impl):
    x = np.array([[0.0, 0.0]])
    c = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])  # all equidistant
    labels, dists = impl.kmeans_assign(x, c)
    assert labels[0] == 0
    assert dists[0] == pytest.approx(1.0)


def test_scatter_add_accumulates_duplicates():
    out = np.zeros((3, 2))
    ids = np.array([1, 1, 2], dtype=np.int64)
    vals = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    scatter_add_rows(out, ids, vals)
    np.testing.assert_array_equal(out, [[0, 0], [4, 6], [5, 6]])


def test_env_flag_selects_numpy_backend():
    code = "import descnet.kernels as k; print(k.BACKEND)"
    res = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "DESCNET_BACKEND": "numpy"},
    )
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip() == "numpy"


def test_default_backend_is_numba_when_available():
    if HAVE_NUMBA:
        assert BACKEND == "numba"
    assert callable(conv_pool_forward)
    assert callable(conv_pool_backward)
    assert callable(kmeans_assign)
    assert callable(kmeans_update)
