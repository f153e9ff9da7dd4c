"""Death-process simulators and their sup-norm checks.

Covers the rate-1 pure death process, the jump death process with
intensity ``gamma * y`` and jump ``d``, independent bins of balls dying at
rate 1, and the pair count of a random perfect matching inside a subset.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from kcore_lab.degrees import DegreeSequence
from kcore_lab.errors import DomainError
from kcore_lab.theory import DegreeDistribution, h_func, h1_func

SUP_MESH = 1e-3


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """Right-continuous step path: ``values[i]`` holds on ``[times[i], times[i+1])``."""

    times: np.ndarray
    values: np.ndarray
    normalizer: float

    def at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.maximum(idx, 0)]


@dataclass(frozen=True)
class JumpProcessSpec:
    x0: float
    gamma: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if not (self.x0 > 0 and self.gamma > 0 and self.d > 0):
            raise DomainError("x0, gamma and d must be positive")


@dataclass(frozen=True, eq=False)
class BinEnsemble:
    initial: DegreeSequence
    times: np.ndarray
    snapshots: np.ndarray  # (len(times), max_degree + 1) counts U_r(t)

    def weighted_tail(self, k: int) -> np.ndarray:
        """``sum_{r>=k} r U_r(t) / n`` for each snapshot."""
        r = np.arange(self.snapshots.shape[1])
        return (self.snapshots[:, k:] * r[k:]).sum(axis=1) / self.initial.n

    def count_tail(self, k: int) -> np.ndarray:
        return self.snapshots[:, k:].sum(axis=1) / self.initial.n


@dataclass(frozen=True, eq=False)
class MatchingTailStats:
    m: int
    y: int
    u: float
    samples: np.ndarray
    empirical_tail: float
    bound: float
    exact_tail: float
    stderr: float

    @property
    def bound_holds(self) -> bool:
        return self.empirical_tail <= self.bound + 3.0 * self.stderr

    @property
    def matches_exact(self) -> bool:
        sigma = math.sqrt(self.exact_tail * (1.0 - self.exact_tail) / self.samples.size)
        return abs(self.empirical_tail - self.exact_tail) <= 3.0 * sigma + 1e-15


def default_time_grid(points: int = 200, t_max: float = 10.0) -> np.ndarray:
    """``0`` followed by log-spaced times up to ``t_max``."""
    return np.concatenate([[0.0], np.geomspace(1e-3, t_max, points - 1)])


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------


def simulate_pure_death(n: int, rng: np.random.Generator) -> TrajectorySample:
    """Rate-1 death process from ``n`` balls, built from sorted Exp(1) lifetimes."""
    if n < 1:
        raise DomainError("n must be at least 1")
    life = np.sort(rng.standard_exponential(n))
    times = np.concatenate([[0.0], life])
    values = np.arange(n, -1, -1, dtype=float)
    return TrajectorySample(times, values, float(n))


def simulate_jump_death(spec: JumpProcessSpec, rng: np.random.Generator) -> TrajectorySample:
    """From level ``y > 0`` jump to ``y - d`` after an Exp(rate ``gamma y``) wait."""
    jumps = int(math.ceil(spec.x0 / spec.d))
    # guard against x0/d landing a hair above an integer
    while spec.x0 - (jumps - 1) * spec.d <= 0:
        jumps -= 1
    levels = spec.x0 - spec.d * np.arange(jumps + 1)
    gaps = rng.standard_exponential(jumps) / (spec.gamma * levels[:-1])
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    return TrajectorySample(times, levels, float(spec.x0))


def coupled_jump_death(spec: JumpProcessSpec, rng: np.random.Generator):
    """Couple the jump process from ``x0`` with one from ``d * ceil(x0/d)``.

    Both jump whenever the smaller one does; the larger also jumps alone at
    the rate difference.  Returns the two paths on a common time axis.
    """
    y, j = spec.x0 / spec.d, float(math.ceil(spec.x0 / spec.d))
    scale = spec.gamma * spec.d
    t = 0.0
    times, ys, js = [0.0], [y], [j]
    while y > 0 or j > 0:
        ry, rj = max(y, 0.0), max(j, 0.0)
        total = max(ry, rj)
        t += rng.standard_exponential() / (total * scale)
        common = min(ry, rj)
        if rng.random() * total < common:
            y, j = y - 1.0, j - 1.0
        elif ry > rj:
            y -= 1.0
        else:
            j -= 1.0
        times.append(t)
        ys.append(y)
        js.append(j)
    times = np.array(times)
    a = TrajectorySample(times, spec.d * np.array(ys), spec.x0)
    b = TrajectorySample(times, spec.d * np.array(js), spec.d * math.ceil(spec.x0 / spec.d))
    return a, b


def simulate_bins(
    seq: DegreeSequence,
    time_grid=None,
    rng: np.random.Generator | None = None,
    method: str = "events",
) -> BinEnsemble:
    """Independent rate-1 death in every bin, snapshotted as ``U_r(t)``.

    ``binomial`` thins each bin between consecutive grid times with survival
    ``exp(-dt)``, which is exact for the joint law on the grid;
    ``events`` draws every ball's lifetime and is the faster default.
    """
    if rng is None:
        raise DomainError("a generator is required")
    grid = default_time_grid() if time_grid is None else np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) < 0) or (grid.size and grid[0] < 0):
        raise DomainError("time grid must be non-negative and nondecreasing")
    width = int(seq.degrees.max()) + 1 if seq.n else 1
    snaps = np.zeros((grid.size, width), dtype=np.int64)
    if method == "binomial":
        alive = seq.degrees.copy()
        prev = 0.0
        for i, t in enumerate(grid):
            alive = rng.binomial(alive, math.exp(-(t - prev)))
            prev = t
            snaps[i] = np.bincount(alive, minlength=width)
    elif method == "events":
        d = seq.degrees
        owner = np.repeat(np.arange(seq.n), d)
        life = rng.standard_exponential(owner.size)
        # a ball is alive at grid index j iff j < first_dead
        first_dead = np.searchsorted(grid, life, side="left")
        order = np.lexsort((first_dead, owner))
        first_dead = first_dead[order]
        start = np.repeat(np.cumsum(d) - d, d)
        level = d[owner] - (np.arange(owner.size) - start)
        diff = np.zeros((grid.size + 1, width), dtype=np.int64)
        np.add.at(diff[0], d, 1)
        np.add.at(diff, (first_dead, level), -1)
        np.add.at(diff, (first_dead, level - 1), 1)
        snaps = np.cumsum(diff[:-1], axis=0)
    else:
        raise DomainError(f"unknown method {method!r}")
    return BinEnsemble(seq, grid, snaps)


def _pair_count_exact(m: int, y: int, z: int) -> Fraction:
    """P(Z = z) by inclusion-exclusion over binomial moments ``E C(Z, j)``."""
    total = Fraction(0)
    jmax = min(y // 2, m)
    for j in range(z, jmax + 1):
        moment = Fraction(math.comb(y, 2 * j) * math.factorial(2 * j), 2**j * math.factorial(j))
        for i in range(j):
            moment /= 2 * m - 1 - 2 * i
        total += (-1) ** (j - z) * math.comb(j, z) * moment
    return total


def matching_tail_exact(m: int, y: int, u: float) -> float:
    """Exact ``P(Z >= u)`` from the binomial-moment product formula."""
    lo = max(0, math.ceil(u))
    top = min(y // 2, m)
    if lo > top:
        return 0.0
    return float(sum(_pair_count_exact(m, y, z) for z in range(lo, top + 1)))


def matching_tail_bound(m: int, y: int, u: float) -> float:
    """``(y^2 / (m u))^u``."""
    return (y * y / (m * u)) ** u


def matching_pair_tail(
    m: int, y: int, u: float, trials: int, rng: np.random.Generator, chunk: int = 10_000
) -> MatchingTailStats:
    """Monte Carlo of the number of matched pairs lying inside a ``y``-subset."""
    if m < 1 or y < 0 or y > 2 * m:
        raise DomainError("need m >= 1 and 0 <= y <= 2m")
    if not u > 0:
        raise DomainError("u must be positive")
    if trials < 1:
        raise DomainError("trials must be positive")
    samples = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        perm = np.argsort(rng.random((size, 2 * m)), axis=1)
        inside = perm < y
        samples[done : done + size] = np.count_nonzero(inside[:, 0::2] & inside[:, 1::2], axis=1)
        done += size
    emp = float(np.mean(samples >= u))
    stderr = math.sqrt(emp * (1.0 - emp) / trials)
    return MatchingTailStats(
        m=m,
        y=y,
        u=u,
        samples=samples,
        empirical_tail=emp,
        bound=matching_tail_bound(m, y, u),
        exact_tail=matching_tail_exact(m, y, u),
        stderr=stderr,
    )


# ---------------------------------------------------------------------------
# Sup-norm checks
# ---------------------------------------------------------------------------


def sup_deviation(
    times: np.ndarray,
    values: np.ndarray,
    curve: Callable[[np.ndarray], np.ndarray],
    t_max: float | None = None,
    mesh: float = SUP_MESH,
) -> float:
    """``sup_t |X(t) - curve(t)|`` for a right-continuous step path ``X``.

    Checked at each jump from both sides and on a grid of the given mesh
    up to ``t_max`` (the last jump by default).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    at_jump = curve(times)
    worst = float(np.max(np.abs(values - at_jump)))
    if times.size > 1:
        worst = max(worst, float(np.max(np.abs(values[:-1] - at_jump[1:]))))
    end = times[-1] if t_max is None else t_max
    if end > 0 and mesh > 0:
        grid = np.arange(0.0, end, mesh)
        idx = np.searchsorted(times, grid, side="right") - 1
        worst = max(worst, float(np.max(np.abs(values[np.maximum(idx, 0)] - curve(grid)))))
    return worst


def pure_death_sup(sample: TrajectorySample) -> float:
    """``sup_t |N(t)/n - exp(-t)|``; exact since the curve is monotone."""
    return sup_deviation(sample.times, sample.values / sample.normalizer, lambda t: np.exp(-t), mesh=0)


def jump_death_sup(sample: TrajectorySample, spec: JumpProcessSpec) -> float:
    rate = spec.gamma * spec.d
    return sup_deviation(
        sample.times, sample.values / sample.normalizer, lambda t: np.exp(-rate * t), mesh=0
    )


def bins_weighted_sup(ens: BinEnsemble, dist: DegreeDistribution, k: int) -> float:
    """Max over the grid of ``|sum_{r>=k} r U_r(t)/n - h(exp(-t))|``."""
    return float(np.max(np.abs(ens.weighted_tail(k) - h_func(dist, k, np.exp(-ens.times)))))


def bins_count_sup(ens: BinEnsemble, dist: DegreeDistribution, k: int) -> float:
    return float(np.max(np.abs(ens.count_tail(k) - h1_func(dist, k, np.exp(-ens.times)))))


def bins_full_statistic(ens: BinEnsemble, dist: DegreeDistribution) -> float:
    """Max over the grid of ``sum_r r |U_r(t)/n - P(W_{exp(-t)} = r)|``.

    The series is cut at the larger of the observed and stored supports,
    which is exact for a finite sequence.
    """
    from scipy.stats import binom

    width = max(ens.snapshots.shape[1], dist.probs.size)
    r = np.arange(width)
    probs = np.zeros(width)
    probs[: dist.probs.size] = dist.probs
    worst = 0.0
    for t, row in zip(ens.times, ens.snapshots):
        emp = np.zeros(width)
        emp[: row.size] = row / ens.initial.n
        kernel = binom.pmf(r[None, :], r[:, None], math.exp(-t))
        worst = max(worst, float(np.sum(r * np.abs(emp - probs @ kernel))))
    return worst


def trajectory_sup(traj, dist: DegreeDistribution, k: int) -> dict:
    """Sup deviations of a fully recorded half-edge run from its limit curves.

    Keys ``LH``, ``H``, ``H1`` and ``L`` compare ``(L+H)/n``, ``H/n``,
    ``H1/n`` and ``L/n`` on ``[0, tau]`` with ``lam p^2``, ``h(p)``,
    ``h1(p)`` and ``lam p^2 - h(p)`` at ``p = exp(-t)``, where the first
    curve uses the realized ``2m/n`` in place of ``lam``.
    """
    if traj.t.size == 0:
        raise DomainError("trajectory was not recorded (use record='full')")
    lam = dist.mean_lambda
    n = traj.n
    # the final row is the stopping state; its L = -1 is a convention
    L = np.maximum(traj.L, 0).astype(float)
    curves = {
        "LH": ((L + traj.H) / n, lambda t: traj.two_m / n * np.exp(-2 * t)),
        "H": (traj.H / n, lambda t: h_func(dist, k, np.exp(-t))),
        "H1": (traj.H1 / n, lambda t: h1_func(dist, k, np.exp(-t))),
        "L": (L / n, lambda t: lam * np.exp(-2 * t) - h_func(dist, k, np.exp(-t))),
    }
    return {
        key: sup_deviation(traj.t, vals, curve, t_max=traj.t[-1])
        for key, (vals, curve) in curves.items()
    }


def write_trajectory_csv(path, sample: TrajectorySample, predicted, meta: dict) -> None:
    """CSV ``t,value,normalized,predicted`` plus a JSON sidecar ``<path>.json``."""
    pred = predicted(sample.times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "normalized", "predicted"])
        for t, v, p in zip(sample.times.tolist(), sample.values.tolist(), pred.tolist()):
            w.writerow([repr(t), repr(v), repr(v / sample.normalizer), repr(p)])
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
