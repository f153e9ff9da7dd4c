"""Independent reference computations used by the tests.

These deliberately avoid the package's own numerics: Poisson tails come from
the regularized incomplete gamma function and roots from scipy's brentq.
"""

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammainc
from scipy.stats import binom


def tail(j, mu):
    """P(Po(mu) >= j) via the regularized lower incomplete gamma."""
    mu = np.asarray(mu, dtype=float)
    if j == 0:
        return np.ones_like(mu)
    return gammainc(j, mu)


def ratio(k, mu):
    return mu / tail(k - 1, mu)


def lambda_crit(k, top=50.0, step=1e-4):
    grid = np.arange(step, top, step)
    vals = ratio(k, grid)
    i = int(np.argmin(vals))
    res = minimize_scalar(
        lambda x: float(ratio(k, x)), bounds=(grid[max(i - 1, 0)], grid[i + 1]),
        method="bounded", options={"xatol": 1e-12},
    )
    return float(res.fun), float(res.x)


def largest_root(k, lam):
    f = lambda x: x - lam * float(tail(k - 1, x))  # noqa: E731
    _, argmin = lambda_crit(k) if k > 2 else (1.0, 1e-9)
    return brentq(f, argmin, lam + 1.0, xtol=1e-14)


def sign_changes(k, lam, lo=1e-4, hi=None, step=1e-4):
    hi = lam + 1.0 if hi is None else hi
    grid = np.arange(lo, hi, step)
    s = np.sign(ratio(k, grid) - lam)
    idx = np.nonzero(np.diff(s))[0]
    return grid[idx]


def generic_h(probs, k, p):
    """h and h1 by direct summation over the thinning kernel (``p`` may be an array)."""
    probs = np.asarray(probs, dtype=float)
    p = np.asarray(p, dtype=float)
    r = np.arange(probs.size)
    j = np.arange(k, probs.size)
    # kernel[j, r, ...] = P(Bin(r, p) = j)
    kernel = binom.pmf(j[:, None, None], r[None, :, None], p.reshape(1, 1, -1))
    w = np.einsum("r,jrp->jp", probs, kernel)
    h = (j[:, None] * w).sum(axis=0).reshape(p.shape)
    h1 = w.sum(axis=0).reshape(p.shape)
    return h, h1


def generic_p_hat(probs, k, step=1e-5):
    probs = np.asarray(probs, dtype=float)
    lam = float(np.dot(np.arange(probs.size), probs))
    grid = np.arange(1.0, 0.0, -step)
    g = lam * grid * grid - generic_h(probs, k, grid)[0]
    neg = np.nonzero(g < -1e-14)[0]
    if neg.size == 0:
        return 0.0
    i = int(neg[0])
    if i == 0:
        return 1.0
    f = lambda p: lam * p * p - float(generic_h(probs, k, p)[0])  # noqa: E731
    return brentq(f, grid[i], grid[i - 1], xtol=1e-14)
