"""Analytic side of the k-core problem.

Poisson tails, the threshold ``lambda_crit(k)``, the fixed points of
``mu / psi_{k-1}(mu) = lambda``, binomial thinning of a degree law, the
core-size generating functions ``h`` and ``h1`` and the resulting
core-size predictions.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

from kcore_lab.errors import DomainError, NoSupercriticalRoot, StructureError

ZERO_TOL = 1e-12
MU_TOL = 1e-10
P_TOL = 1e-10
GRID_STEP = 1e-3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Limit degree law ``(p_r)`` with finite stored support.

    ``poisson_lambda`` is set for the Poisson family; the stored ``probs`` are
    then the pmf truncated where the remaining tail is below 1e-17, and the
    closed forms are used wherever they exist.
    """

    probs: np.ndarray
    mean_lambda: float
    poisson_lambda: float | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("probs must be a non-empty 1-d sequence")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        if not (self.mean_lambda > 0 and math.isfinite(self.mean_lambda)):
            raise DomainError("mean degree must be finite and positive")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def poisson(cls, lam: float) -> "DegreeDistribution":
        lam = float(lam)
        if not (lam > 0 and math.isfinite(lam)):
            raise DomainError("Poisson mean must be finite and positive")
        top = int(math.ceil(lam + 40.0 * math.sqrt(lam) + 60.0))
        r = np.arange(top + 1)
        pmf = np.exp(-lam + r * math.log(lam) - gammaln(r + 1))
        # drop the far tail once it is negligible
        tail = np.cumsum(pmf[::-1])[::-1]
        keep = int(np.nonzero(tail >= 1e-17)[0][-1]) + 1
        return cls(pmf[:keep], lam, poisson_lambda=lam)

    @classmethod
    def explicit(cls, probs, tol: float = 1e-9) -> "DegreeDistribution":
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("probs must be a non-empty 1-d sequence")
        total = probs.sum()
        if abs(total - 1.0) > tol:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        probs = probs / total
        # trailing zeros carry no information
        nz = np.nonzero(probs)[0]
        if nz.size:
            probs = probs[: nz[-1] + 1]
        mean = float(np.dot(np.arange(probs.size), probs))
        return cls(probs, mean)

    @classmethod
    def point_mass(cls, r: int) -> "DegreeDistribution":
        probs = np.zeros(int(r) + 1)
        probs[r] = 1.0
        return cls.explicit(probs)

    @classmethod
    def from_json(cls, obj) -> "DegreeDistribution":
        """Parse ``{"type": "poisson", "lambda": x}`` or ``{"type": "explicit", "probs": [...]}``."""
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        kind = obj.get("type")
        if kind == "poisson":
            return cls.poisson(obj["lambda"])
        if kind == "explicit":
            return cls.explicit(obj["probs"], tol=1e-6)
        raise DomainError(f"unknown distribution type {kind!r}")

    def to_json(self) -> dict:
        if self.is_poisson:
            return {"type": "poisson", "lambda": self.poisson_lambda}
        return {"type": "explicit", "probs": [float(x) for x in self.probs]}

    @property
    def is_poisson(self) -> bool:
        return self.poisson_lambda is not None

    @property
    def max_degree(self) -> int:
        return self.probs.size - 1

    def pmf(self, r: int) -> float:
        return float(self.probs[r]) if 0 <= r < self.probs.size else 0.0


@dataclass(frozen=True)
class CorePrediction:
    k: int
    lambda_crit: float | None
    mu: float
    p_hat: float
    v_frac: float
    e_frac: float
    tangent: bool = False
    strict_below: bool = True


@dataclass(frozen=True)
class RootPair:
    mu_minus: float
    mu_plus: float


@dataclass(frozen=True)
class PHatSolution:
    p_hat: float
    tangent: bool
    strict_below: bool


# ---------------------------------------------------------------------------
# Poisson tails and the threshold function
# ---------------------------------------------------------------------------


def _tail_head(j: int, mu: np.ndarray) -> np.ndarray:
    # 1 - sum_{r<j} P(Po(mu)=r), pmf by multiplicative recursion in log space
    log_mu = np.log(mu)
    log_term = -mu
    head = np.exp(log_term)
    for r in range(1, j):
        log_term = log_term + log_mu - math.log(r)
        head += np.exp(log_term)
    return np.clip(1.0 - head, 0.0, 1.0)


def _tail_direct(j: int, mu: np.ndarray) -> np.ndarray:
    # sum_{r>=j} P(Po(mu)=r) for mu < j, cut by the geometric ratio bound
    term = np.exp(-mu + j * np.log(mu) - gammaln(j + 1))
    total = term.copy()
    r = j
    while True:
        r += 1
        term = term * mu / r
        total += term
        q = mu / (r + 1)
        bound = term * q / (1.0 - q)
        if np.all(bound <= 1e-17 * total) or np.all(bound < 1e-300):
            return np.clip(total, 0.0, 1.0)


def poisson_tail(j: int, mu):
    """``P(Po(mu) >= j)``; ``mu`` may be a scalar or an array."""
    if j < 0:
        raise DomainError("j must be non-negative")
    arr = np.asarray(mu, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("mu must be non-negative")
    out = np.ones_like(arr)
    if j > 0:
        flat = arr.reshape(-1)
        res = out.reshape(-1)
        zero = flat == 0
        direct = (flat < j) & ~zero
        head = ~direct & ~zero
        res[zero] = 0.0
        if head.any():
            res[head] = _tail_head(j, flat[head])
        if direct.any():
            res[direct] = _tail_direct(j, flat[direct])
    return float(out) if out.ndim == 0 else out


def phi(k: int, mu):
    """``psi_{k-1}(mu) / mu``; the reciprocal of the threshold function."""
    if k < 2:
        raise DomainError("k must be at least 2")
    arr = np.asarray(mu, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("mu must be positive")
    out = poisson_tail(k - 1, arr) / arr
    return float(out) if np.ndim(out) == 0 else out


def _golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-13):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = float(0.5 * (a + b))
    return x, float(f(x))


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Root of ``f`` bracketed by ``f(lo) < 0 <= f(hi)``; either order of lo, hi."""
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


@lru_cache(maxsize=None)
def phi_argmax(k: int) -> float:
    """Unique maximiser of ``phi(k, .)`` for ``k >= 3``."""
    if k < 3:
        raise DomainError("phi has an interior maximum only for k >= 3")
    top = max(50.0, 4.0 * k + 50.0)
    grid = np.arange(GRID_STEP, top, GRID_STEP)
    vals = phi(k, grid)
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    x, _ = _golden_max(lambda x: phi(k, x), a, b)
    return float(x)


@lru_cache(maxsize=None)
def lambda_crit(k: int) -> float:
    """Threshold ``min_{mu>0} mu / psi_{k-1}(mu)``."""
    if k < 2:
        raise DomainError("k must be at least 2")
    if k == 2:
        return 1.0
    return 1.0 / phi(k, phi_argmax(k))


def _excess(k: int, lam: float) -> Callable[[float], float]:
    return lambda mu: mu / poisson_tail(k - 1, mu) - lam


def mu_k(k: int, lam: float) -> float:
    """Largest solution of ``mu / psi_{k-1}(mu) = lam``."""
    if k < 2:
        raise DomainError("k must be at least 2")
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError("lambda must be finite and positive")
    if lam <= lambda_crit(k):
        raise NoSupercriticalRoot(f"lambda={lam} is not above lambda_{k}={lambda_crit(k)}")
    f = _excess(k, lam)
    lo = 1e-12 if k == 2 else phi_argmax(k)
    # mu / psi >= mu, so lam + 1 is always past the root
    hi = max(lam + 1.0, lo)
    return _bisect(f, lo, hi, MU_TOL)


def _count_sign_changes(values: np.ndarray, tol: float = 1e-12) -> int:
    s = np.sign(values[np.abs(values) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def root_pair(k: int, lam: float) -> RootPair:
    """Both positive roots of ``mu / psi_{k-1}(mu) = lam`` for ``k >= 3``."""
    if k == 2:
        raise StructureError("for k = 2 there is exactly one positive root")
    if k < 2:
        raise DomainError("k must be at least 2")
    mu_plus = mu_k(k, lam)
    f = _excess(k, lam)
    star = phi_argmax(k)
    lo = 0.5 * star
    while f(lo) <= 0:
        lo *= 0.5
    mu_minus = _bisect(f, star, lo, MU_TOL)

    gap = mu_plus - mu_minus
    step = min(GRID_STEP, gap / 10.0)
    dense = np.arange(mu_minus / 4.0, 2.0 * mu_plus + 2.0, GRID_STEP)
    near = np.linspace(mu_minus - 5 * step, mu_plus + 5 * step, 41)
    grid = np.unique(np.concatenate([dense, near[near > 0]]))
    vals = grid / poisson_tail(k - 1, grid) - lam
    # grid points within solver tolerance of a root carry no sign information
    far = np.minimum(np.abs(grid - mu_minus), np.abs(grid - mu_plus)) > 1e-8
    changes = _count_sign_changes(vals[far])
    if changes != 2:
        raise StructureError(f"expected 2 sign changes, found {changes}")
    return RootPair(mu_minus, mu_plus)


# ---------------------------------------------------------------------------
# Thinning and the core generating functions
# ---------------------------------------------------------------------------


def _check_p(p):
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise DomainError("p must lie in [0, 1]")
    return arr


def thinned_pmf(dist: DegreeDistribution, p: float, r: int, generic: bool = True) -> float:
    """``P(W_p = r)`` where ``W_p`` keeps each of ``W`` points with probability ``p``."""
    _check_p(p)
    if r < 0:
        raise DomainError("r must be non-negative")
    if dist.is_poisson and not generic:
        x = dist.poisson_lambda * p
        if x == 0:
            return 1.0 if r == 0 else 0.0
        return float(math.exp(-x + r * math.log(x) - math.lgamma(r + 1)))
    if r > dist.max_degree:
        return 0.0
    l = np.arange(r, dist.max_degree + 1)
    return float(np.dot(dist.probs[r:], binom.pmf(r, l, p)))


def thinned_vector(dist: DegreeDistribution, p: float) -> np.ndarray:
    """Whole pmf of ``W_p`` on ``0..max_degree``."""
    _check_p(p)
    l = np.arange(dist.max_degree + 1)
    kernel = binom.pmf(l[None, :], l[:, None], p)
    return dist.probs @ kernel


def _low_sums(dist: DegreeDistribution, k: int, p: np.ndarray):
    """Per p: ``sum_l p_l sum_{r<k} pi_lr(p)`` and the same weighted by r."""
    l = np.arange(dist.max_degree + 1)
    flat = p.reshape(-1)
    mass = np.empty_like(flat)
    first = np.empty_like(flat)
    chunk = 4096
    for s in range(0, flat.size, chunk):
        pc = flat[s : s + chunk, None]
        m_acc = np.zeros((pc.shape[0], l.size))
        f_acc = np.zeros_like(m_acc)
        for r in range(k):
            pr = binom.pmf(r, l[None, :], pc)
            m_acc += pr
            f_acc += r * pr
        mass[s : s + chunk] = m_acc @ dist.probs
        first[s : s + chunk] = f_acc @ dist.probs
    return mass.reshape(p.shape), first.reshape(p.shape)


def h_func(dist: DegreeDistribution, k: int, p, generic: bool = False):
    """``E[W_p 1{W_p >= k}]``."""
    arr = _check_p(p)
    if dist.is_poisson and not generic:
        x = dist.poisson_lambda * arr
        out = x * poisson_tail(k - 1, x)
    else:
        _, first = _low_sums(dist, k, arr)
        lam = float(np.dot(np.arange(dist.max_degree + 1), dist.probs))
        out = np.maximum(lam * arr - first, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def h1_func(dist: DegreeDistribution, k: int, p, generic: bool = False):
    """``P(W_p >= k)``."""
    arr = _check_p(p)
    if dist.is_poisson and not generic:
        out = poisson_tail(k, dist.poisson_lambda * arr)
    else:
        mass, _ = _low_sums(dist, k, arr)
        out = np.clip(dist.probs.sum() - mass, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def core_gap(dist: DegreeDistribution, k: int, p, generic: bool = False):
    """``lambda p^2 - h(p)``; its largest zero on (0, 1] is ``p_hat``."""
    arr = _check_p(p)
    out = dist.mean_lambda * arr * arr - h_func(dist, k, arr, generic=generic)
    return float(out) if np.ndim(out) == 0 else out


def solve_p_hat(
    dist: DegreeDistribution, k: int, generic: bool = False, step: float = GRID_STEP
) -> PHatSolution:
    """Largest ``p`` in (0, 1] with ``lambda p^2 = h(p)``, or 0 if none.

    Scans a grid downward from ``p = 1``.  A zero that is only touched
    (no sign change) is reported with ``tangent=True``; ``strict_below``
    says whether the gap is negative just below the root.
    """
    if k < 2:
        raise DomainError("k must be at least 2")
    g = lambda x: core_gap(dist, k, x, generic=generic)  # noqa: E731
    n = int(round(1.0 / step))
    grid = np.linspace(1.0, step, n)
    vals = core_gap(dist, k, grid, generic=generic)

    root, tangent = 0.0, False
    for i in range(n):
        gi = vals[i]
        if gi < -ZERO_TOL:
            root = 1.0 if i == 0 else _bisect(g, grid[i], grid[i - 1], P_TOL)
            break
        if abs(gi) <= ZERO_TOL:
            nxt = vals[i + 1] if i + 1 < n else 1.0
            root, tangent = float(grid[i]), not (nxt < -ZERO_TOL)
            break
        if 0 < i < n - 1 and gi < vals[i - 1] and gi <= vals[i + 1]:
            pm, gm = _golden_max(lambda x: -g(x), grid[i + 1], grid[i - 1])
            gm = -gm
            if gm < -ZERO_TOL:
                root = _bisect(g, pm, grid[i - 1], P_TOL)
                break
            if gm <= ZERO_TOL:
                root, tangent = pm, True
                break

    strict = False
    if root > 0:
        probe = root - step * np.array([1e-3, 1e-2, 0.1, 0.25, 0.5, 0.75, 1.0])
        probe = probe[probe > 0]
        strict = bool(np.all(core_gap(dist, k, probe, generic=generic) < 0))
    return PHatSolution(float(root), tangent, strict)


def p_hat(dist: DegreeDistribution, k: int, generic: bool = False) -> float:
    return solve_p_hat(dist, k, generic=generic).p_hat


def predict_core(dist: DegreeDistribution, k: int, generic: bool = False) -> CorePrediction:
    """Limiting vertex and edge fractions of the k-core."""
    if k < 2:
        raise DomainError("k must be at least 2")
    lam = dist.mean_lambda
    if dist.is_poisson and not generic:
        crit = lambda_crit(k)
        tangent = strict = False
        if lam > crit + 1e-12:
            mu = mu_k(k, lam)
            strict = True
        elif lam >= crit - 1e-12:
            mu = 0.0 if k == 2 else phi_argmax(k)
            tangent = True
        else:
            mu = 0.0
        ph = mu / lam
        return CorePrediction(
            k=k,
            lambda_crit=crit,
            mu=mu,
            p_hat=ph,
            v_frac=poisson_tail(k, mu),
            e_frac=lam * ph * ph / 2.0,
            tangent=tangent,
            strict_below=strict,
        )
    sol = solve_p_hat(dist, k, generic=generic)
    ph = sol.p_hat
    return CorePrediction(
        k=k,
        lambda_crit=lambda_crit(k) if dist.is_poisson else None,
        mu=lam * ph,
        p_hat=ph,
        v_frac=h1_func(dist, k, ph, generic=generic),
        e_frac=lam * ph * ph / 2.0,
        tangent=sol.tangent,
        strict_below=sol.strict_below,
    )
