"""Pure-Python reference kernels.

Same signatures and results as the compiled ``_ckernels`` module. Used when
the extension is unavailable or ``FXHYBRID_PURE_PYTHON=1`` is set.
"""
import numpy as np


def exp_smooth(x, alpha, start, init):
    """Recursive smoother ``out[t] = out[t-1] + alpha * (x[t] - out[t-1])``.

    Values before ``start`` are NaN and ``out[start] = init``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.full(n, np.nan)
    if start >= n:
        return out
    prev = float(init)
    out[start] = prev
    for t in range(start + 1, n):
        prev = prev + alpha * (x[t] - prev)
        out[t] = prev
    return out


def arma_residuals(y, c, phi, theta):
    """Conditional innovations of an ARMA model with zero-seeded history."""
    y = np.asarray(y, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    n = y.shape[0]
    p = phi.shape[0]
    q = theta.shape[0]
    e = np.zeros(n)
    for t in range(p, n):
        acc = y[t] - c
        for i in range(p):
            acc -= phi[i] * y[t - 1 - i]
        for j in range(q):
            k = t - 1 - j
            if k >= p:
                acc -= theta[j] * e[k]
        e[t] = acc
    return e


def analysis_step(xe, h, g):
    """Filter a pre-extended signal with (h, g) and keep odd-phase samples.

    ``xe`` carries ``L - 1`` extension samples on each side; the result has
    ``(len(xe) - L + 1) // 2`` coefficients per band.
    """
    xe = np.asarray(xe, dtype=np.float64)
    L = len(h)
    m = (xe.shape[0] - L + 1) // 2
    a = np.zeros(m)
    d = np.zeros(m)
    for k in range(m):
        base = 2 * k + L
        sa = 0.0
        sd = 0.0
        for j in range(L):
            v = xe[base - j]
            sa += h[j] * v
            sd += g[j] * v
        a[k] = sa
        d[k] = sd
    return a, d


def synthesis_step(a, d, h, g, n):
    """Adjoint of :func:`analysis_step` restricted to the ``n`` signal samples."""
    L = len(h)
    m = len(a)
    x = np.zeros(n)
    for t in range(n):
        s = 0.0
        # taps j = 2k + 1 - t must lie in [0, L)
        k_lo = t // 2
        k_hi = min(m - 1, (t + L - 2) // 2)
        for k in range(k_lo, k_hi + 1):
            j = 2 * k + 1 - t
            s += a[k] * h[j] + d[k] * g[j]
        x[t] = s
    return x
