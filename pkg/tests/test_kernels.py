"""The numba and numpy kernel backends must agree."""

import numpy as np
import pytest

from coxnet import _kernels
from coxnet.partial_likelihood import LikelihoodContext

from .conftest import random_dataset

pytestmark = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")


@pytest.fixture
def inputs(rng):
    d = random_dataset(rng, 200, 4, ties=True)
    ctx = LikelihoodContext.from_dataset(d)
    eta = ctx.linear_predictor(rng.uniform(-1, 1, 4))
    return ctx, eta


def test_suffix_logsumexp(rng):
    x = rng.normal(0, 50, 500)
    a = _kernels.numba_impl.suffix_logsumexp(x)
    b = _kernels.numpy_impl.suffix_logsumexp(x)
    np.testing.assert_allclose(a, b, rtol=1e-13)
    np.testing.assert_allclose(b[0], np.logaddexp.reduce(x), rtol=1e-13)


def test_cox_loss(inputs):
    ctx, eta = inputs
    idx = ctx.index
    a = _kernels.numba_impl.cox_loss(eta, ctx.status_sorted, idx.group_start)
    b = _kernels.numpy_impl.cox_loss(eta, ctx.status_sorted, idx.group_start)
    assert a == pytest.approx(b, rel=1e-13)


def test_risk_moments(inputs):
    ctx, eta = inputs
    idx = ctx.index
    args = (ctx.X_sorted, eta, ctx.status_sorted, idx.group_start, idx.group_end)
    for want_info in (True, False):
        ra = _kernels.numba_impl.risk_moments(*args, want_info)
        rb = _kernels.numpy_impl.risk_moments(*args, want_info)
        for a, b in zip(ra, rb):
            if a is None or b is None:
                assert a is None and b is None
            else:
                np.testing.assert_allclose(a, b, atol=1e-11)


def test_cd_sweeps(rng):
    p = 6
    A = rng.normal(size=(20, p))
    H = A.T @ A / 20
    g = rng.normal(size=p)
    l1w = np.full(p, 0.05)
    order = np.arange(p)
    out = []
    for impl in (_kernels.numba_impl, _kernels.numpy_impl):
        beta, v = np.zeros(p), g.copy()
        sweeps = impl.cd_sweeps(H, v, beta, l1w, 0.1, order, 500, 1e-14)
        out.append((beta, v, sweeps))
    np.testing.assert_allclose(out[0][0], out[1][0], atol=1e-14)
    np.testing.assert_allclose(out[0][1], out[1][1], atol=1e-13)
    assert out[0][2] == out[1][2]


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("COXNET_DISABLE_NUMBA", "1")
    assert _kernels.select_backend() is _kernels.numpy_impl
    monkeypatch.setenv("COXNET_DISABLE_NUMBA", "0")
    assert _kernels.select_backend() is _kernels.numba_impl
    with pytest.raises(ValueError):
        _kernels.select_backend("fortran")


def test_numpy_log_domain_path_matches(rng):
    """A spread of eta beyond the direct-sum range exercises the log-domain branch."""
    X = rng.normal(size=(50, 2))
    eta = np.sort(rng.normal(0, 400, 50))
    L = _kernels.numpy_impl.suffix_logsumexp(eta)
    assert eta.max() - eta.min() > _kernels._DIRECT_SPAN
    got = _kernels._np_suffix_means(X, eta, L)
    for k in (0, 10, 49):
        w = np.exp(eta[k:] - eta[k:].max())
        np.testing.assert_allclose(got[k], w @ X[k:] / w.sum(), rtol=1e-10, atol=1e-13)
