import numpy as np
import pytest

from sdca import kernels
from sdca import _pykernels

compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                              reason="compiled extension not built")


def _data(seed=0, m=300, n=8):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((m, n))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    x = rng.standard_normal(n)
    return S, x / np.linalg.norm(x) * 0.5


def test_backend_selection(monkeypatch):
    assert kernels.backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.backend("fortran")
    monkeypatch.setenv("SDCA_KERNELS", "python")
    assert kernels.backend("auto") is _pykernels


def test_python_sdca_segment_matches_loop():
    S, x0 = _data()
    ratios = 1.0 / np.arange(1, S.shape[0] + 1)
    lam = 1e-3
    x, y = x0.copy(), np.zeros_like(x0)
    _pykernels.sdca12_epca_segment(S, ratios, lam, 1.0, x, y)
    xr, yr = x0.copy(), np.zeros_like(x0)
    for s, r in zip(S, ratios):
        yr = (1 - r) * yr + r * (lam * xr + (xr @ s) * s)
        n = np.linalg.norm(yr)
        xr = yr / lam if n / lam <= 1 else yr / n * _pykernels.BOUNDARY
    np.testing.assert_allclose(x, xr, atol=1e-15)
    np.testing.assert_allclose(y, yr, atol=1e-15)


@compiled
def test_compiled_matches_python():
    c = kernels.backend("compiled")
    S, x0 = _data(1)
    ratios = np.ascontiguousarray(1.0 / np.arange(1, S.shape[0] + 1))
    outs = []
    for impl in (_pykernels, c):
        x, y = x0.copy(), np.zeros_like(x0)
        it = np.empty_like(S)
        step = impl.sdca12_epca_segment(S, ratios, 1e-4, 1.0, x, y, it)
        outs.append((x, y, it, step))
    for a, b in zip(*outs):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)

    steps = np.full(S.shape[0], 0.01)
    res = []
    for impl in (_pykernels, c):
        x = x0.copy()
        impl.pss_epca_segment(S, steps, 1.0, x)
        res.append(x)
    np.testing.assert_allclose(res[0], res[1], rtol=1e-12, atol=1e-14)

    w = np.random.default_rng(2).uniform(size=S.shape[0])
    np.testing.assert_allclose(_pykernels.weighted_gram_apply(S, w, x0, np.empty(8)),
                               c.weighted_gram_apply(S, w, x0, np.empty(8)), rtol=1e-12)


def test_pss_segment_stays_feasible():
    S, x0 = _data(3)
    x = x0.copy()
    _pykernels.pss_epca_segment(S, np.full(S.shape[0], 5.0), 1.0, x)
    assert np.linalg.norm(x) <= 1.0
