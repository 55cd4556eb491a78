"""Pure-Python/numpy reference implementations of the hot loops.

Signatures match the compiled ``_ckernels`` module exactly; arrays passed as
``x``/``y``/``out`` are updated in place.
"""

import numpy as np

BOUNDARY = 1.0 - 4.0 * np.finfo(np.float64).eps


def _ball(v, mu, radius, out):
    nv = np.sqrt(v @ v)
    if nv == 0.0:
        out[:] = 0.0
    elif nv / mu <= radius:
        out[:] = v / mu
    else:
        out[:] = (radius / nv * BOUNDARY) * v


def sdca12_epca_segment(S, ratios, lam, radius, x, y, iterates=None):
    """Run ``len(S)`` SDCA1/SDCA2 steps on the first E-PCA decomposition.

    Step i: ``z = lam x + <x, s_i> s_i``, ``y = (1 - r_i) y + r_i z`` and
    ``x = argmin_{||x|| <= radius} (lam/2)||x||^2 - <y, x>``. If ``iterates``
    is given, row i receives the new ``x``. Returns the last step norm.
    """
    step = 0.0
    x_new = np.empty_like(x)
    for i in range(S.shape[0]):
        s = S[i]
        r = ratios[i]
        z = lam * x + (x @ s) * s
        y[:] = (1.0 - r) * y + r * z
        _ball(y, lam, radius, x_new)
        d = x_new - x
        step = np.sqrt(d @ d)
        x[:] = x_new
        if iterates is not None:
            iterates[i] = x
    return float(step)


def pss_epca_segment(S, steps, radius, x, iterates=None):
    """Projected stochastic subgradient steps ``x <- P(x + g_i <x, s_i> s_i)``."""
    step = 0.0
    for i in range(S.shape[0]):
        s = S[i]
        x_new = x + (steps[i] * (x @ s)) * s
        nx = np.sqrt(x_new @ x_new)
        if nx > radius:
            x_new *= radius / nx * BOUNDARY
        d = x_new - x
        step = np.sqrt(d @ d)
        x[:] = x_new
        if iterates is not None:
            iterates[i] = x
    return float(step)


def weighted_gram_apply(S, w, x, out):
    """``out = sum_i w_i <x, s_i> s_i``."""
    out[:] = S.T @ (w * (S @ x))
    return out
