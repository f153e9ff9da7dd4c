"""k-core finders.

``peel_bucket`` is the classic worklist peeling of a built multigraph.
``peel_halfedge`` runs the randomized light half-edge deletion directly on a
degree sequence, revealing partners of the configuration model only as they
are needed, optionally on the continuous-time clock that makes the white-ball
count a death process.  ``brute_force_core`` is the exhaustive oracle.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from kcore_lab.degrees import DegreeSequence
from kcore_lab.errors import DomainError, ParityError, SizeError
from kcore_lab.graphgen import Multigraph

ORDERS = ("fifo", "lifo", "random")
RECORD_MODES = ("none", "summary", "full")
_BATCH = 1 << 14


@dataclass(frozen=True, eq=False)
class CoreResult:
    k: int
    core_vertices: np.ndarray
    e_core: int

    @property
    def v_core(self) -> int:
        return int(self.core_vertices.size)

    @property
    def is_empty(self) -> bool:
        return self.core_vertices.size == 0

    def same_core(self, other: "CoreResult") -> bool:
        return np.array_equal(self.core_vertices, other.core_vertices) and self.e_core == other.e_core


@dataclass(eq=False)
class PeelTrajectory:
    """Recorded white-ball counts of the half-edge process.

    ``t, L, H, H1`` are filled in ``full`` mode only; the last entry is the
    stopping state, where ``L = -1`` by convention.  ``tau`` is NaN when
    no clock was run.
    """

    n: int
    two_m: int
    tau: float
    final_H: int
    final_H1: int
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    L: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    H: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    H1: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    snapshot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bin_counts: list = field(default_factory=list)


def _csr(g: Multigraph):
    order = np.argsort(g.half_edge_owner, kind="stable")
    start = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(g.degree, out=start[1:])
    nbr = g.half_edge_owner[g.pairing[order]]
    return start.tolist(), nbr.tolist()


def _core_edges(g: Multigraph, alive: np.ndarray) -> int:
    e = g.edges()
    if e.size == 0:
        return 0
    return int(np.count_nonzero(alive[e[:, 0]] & alive[e[:, 1]]))


def peel_bucket(
    g: Multigraph, k: int, order: str = "fifo", rng: np.random.Generator | None = None
) -> CoreResult:
    """Repeatedly delete a vertex of current degree < k; loops count 2."""
    if k < 0:
        raise DomainError("k must be non-negative")
    if order not in ORDERS:
        raise DomainError(f"unknown order {order!r}")
    if order == "random" and rng is None:
        raise DomainError("random order needs a generator")
    start, nbr = _csr(g)
    deg = g.degree.tolist()
    n = g.n
    alive = [True] * n
    queued = [False] * n
    pending = [v for v in range(n) if deg[v] < k]
    for v in pending:
        queued[v] = True

    if order == "fifo":
        work = deque(pending)
        pop, push = work.popleft, work.append
    elif order == "lifo":
        work = pending
        pop, push = work.pop, work.append
    else:
        work = pending

        def pop():
            i = int(rng.integers(len(work)))
            last = work.pop()
            if i < len(work):
                last, work[i] = work[i], last
            return last

        push = work.append

    while work:
        v = pop()
        alive[v] = False
        for j in range(start[v], start[v + 1]):
            u = nbr[j]
            if u == v or not alive[u]:
                continue
            deg[u] -= 1
            if deg[u] < k and not queued[u]:
                queued[u] = True
                push(u)

    mask = np.array(alive, dtype=bool)
    return CoreResult(k, np.nonzero(mask)[0], _core_edges(g, mask))


def brute_force_core(g: Multigraph, k: int) -> CoreResult:
    """Largest vertex set whose induced multigraph has minimum degree >= k.

    Enumerates all ``2^n`` subsets, so ``n <= 16``.
    """
    n = g.n
    if n > 16:
        raise SizeError("brute force is limited to n <= 16")
    adj = np.zeros((n, n), dtype=np.int64)
    e = g.edges()
    np.add.at(adj, (e[:, 0], e[:, 1]), 1)
    np.add.at(adj, (e[:, 1], e[:, 0]), 1)

    masks = np.arange(1 << n, dtype=np.int64)
    member = ((masks[:, None] >> np.arange(n)) & 1).astype(np.int64)
    induced = member @ adj
    feasible = np.all((induced >= k) | (member == 0), axis=1)
    sizes = member.sum(axis=1)
    edges = (induced * member).sum(axis=1) // 2

    cand = np.nonzero(feasible)[0]
    top = max(cand.tolist(), key=lambda s: (sizes[s], edges[s], -s))
    union = int(np.bitwise_or.reduce(cand)) if cand.size else 0
    if not feasible[union] or union != top:
        raise AssertionError("feasible subsets have no unique maximal element")
    core = np.nonzero(member[top])[0]
    return CoreResult(k, core, int(edges[top]))


def _uniform_stream(rng: np.random.Generator):
    while True:
        yield from rng.random(_BATCH).tolist()


def _exp_stream(rng: np.random.Generator):
    while True:
        yield from rng.standard_exponential(_BATCH).tolist()


def _halfedge_process(
    degrees: np.ndarray,
    k: int,
    rng: np.random.Generator,
    record: str,
    fixed_pairing: np.ndarray | None = None,
    snapshot_times=None,
    realize: bool = False,
):
    if record not in RECORD_MODES:
        raise DomainError(f"unknown record mode {record!r}")
    if k < 1:
        raise DomainError("k must be positive")
    deg = [int(x) for x in degrees]
    n = len(deg)
    two_m = sum(deg)
    if two_m % 2:
        raise ParityError("degree sum is odd")

    start = [0] * (n + 1)
    for v in range(n):
        start[v + 1] = start[v] + deg[v]
    owner = np.repeat(np.arange(n), degrees).tolist()
    cnt = deg[:]
    vh = list(range(two_m))
    posv = list(range(two_m))
    alive = list(range(two_m))
    pos_alive = list(range(two_m))
    pos_light = [-1] * two_m
    light = []
    for h in range(two_m):
        if deg[owner[h]] < k:
            pos_light[h] = len(light)
            light.append(h)
    L = len(light)
    H = two_m - L
    H1 = sum(1 for d in deg if d >= k)

    def remove(h):
        nonlocal L, H, H1
        j = pos_alive[h]
        last = alive.pop()
        if last != h:
            alive[j] = last
            pos_alive[last] = j
        j = pos_light[h]
        if j >= 0:
            last = light.pop()
            if last != h:
                light[j] = last
                pos_light[last] = j
            pos_light[h] = -1
        v = owner[h]
        c = cnt[v]
        end = start[v] + c - 1
        j = posv[h]
        other = vh[end]
        vh[j] = other
        posv[other] = j
        vh[end] = h
        posv[h] = end
        cnt[v] = c - 1
        if c >= k:
            H -= 1
            if c == k:
                # vertex turns light: its remaining k-1 half-edges join the light set
                H -= k - 1
                L += k - 1
                H1 -= 1
                for q in vh[start[v] : end]:
                    pos_light[q] = len(light)
                    light.append(q)
        else:
            L -= 1

    unif = _uniform_stream(rng)
    clock = record != "none"
    full = record == "full"
    expo = _exp_stream(rng) if clock else None
    ts, Ls, Hs, H1s = [], [], [], []
    snaps = [] if snapshot_times is None else sorted(float(s) for s in snapshot_times)
    snap_i = 0
    bins = []
    pair = [-1] * two_m if realize else None
    fixed = fixed_pairing.tolist() if fixed_pairing is not None else None

    def log(time, level):
        ts.append(time)
        Ls.append(level)
        Hs.append(H)
        H1s.append(H1)

    def snapshot_until(t):
        nonlocal snap_i
        while snap_i < len(snaps) and snaps[snap_i] < t:
            bins.append(np.bincount(cnt, minlength=k + 1))
            snap_i += 1

    t = 0.0
    if L == 0:
        tau = 0.0 if clock else math.nan
        if full:
            log(0.0, L)
    else:
        a = light[int(next(unif) * L)]
        remove(a)
        if full:
            log(0.0, L)
        while True:
            if fixed is not None:
                b = fixed[a]
            else:
                b = alive[int(next(unif) * len(alive))]
            if clock:
                t += next(expo) / len(alive)
                if snaps:
                    snapshot_until(t)
            remove(b)
            if realize:
                pair[a], pair[b] = b, a
            if L == 0:
                tau = t if clock else math.nan
                if full:
                    log(t, -1)
                break
            a = light[int(next(unif) * L)]
            remove(a)
            if full:
                log(t, L)
    if snaps:
        # the process is frozen after it stops
        snapshot_until(math.inf)

    if H % 2:
        raise AssertionError("odd number of core half-edges")
    cnt_arr = np.array(cnt, dtype=np.int64)
    core = CoreResult(k, np.nonzero(cnt_arr >= k)[0], H // 2)
    traj = PeelTrajectory(
        n=n,
        two_m=two_m,
        tau=tau,
        final_H=H,
        final_H1=H1,
        t=np.array(ts, dtype=float),
        L=np.array(Ls, dtype=np.int64),
        H=np.array(Hs, dtype=np.int64),
        H1=np.array(H1s, dtype=np.int64),
        snapshot_times=np.array(snaps[: len(bins)], dtype=float),
        bin_counts=bins,
    )
    graph = None
    if realize:
        rest = np.array(alive, dtype=np.int64)
        rest = rest[rng.permutation(rest.size)]
        pairing = np.array(pair, dtype=np.int64)
        pairing[rest[0::2]] = rest[1::2]
        pairing[rest[1::2]] = rest[0::2]
        graph = Multigraph(n, np.repeat(np.arange(n), degrees), pairing)
    return core, traj, graph


def peel_halfedge(
    seq: DegreeSequence,
    k: int,
    rng: np.random.Generator,
    record: str = "summary",
    snapshot_times=None,
) -> tuple[CoreResult, PeelTrajectory]:
    """k-core of the configuration model on ``seq``, exposing edges on demand.

    While a light half-edge exists, pick one uniformly, reveal its partner
    uniformly among the remaining half-edges and delete both.  With
    ``record`` other than ``"none"`` the deletions run on a clock of rate
    equal to the number of remaining half-edges, giving the stopping time.
    """
    core, traj, _ = _halfedge_process(seq.degrees, k, rng, record, snapshot_times=snapshot_times)
    return core, traj


def peel_halfedge_realized(
    seq: DegreeSequence, k: int, rng: np.random.Generator, record: str = "summary"
) -> tuple[CoreResult, PeelTrajectory, Multigraph]:
    """As ``peel_halfedge``, also completing the revealed pairs to a full multigraph.

    The unrevealed half-edges at the stopping time are matched uniformly, so
    the returned graph is a draw from the configuration model coupled with
    the run.
    """
    return _halfedge_process(seq.degrees, k, rng, record, realize=True)


def peel_halfedge_fixed(
    g: Multigraph, k: int, rng: np.random.Generator, record: str = "summary"
) -> tuple[CoreResult, PeelTrajectory]:
    """Light half-edge deletion on a given multigraph, using its actual partners.

    The trajectory laws of the configuration-model process are not claimed
    in this mode.
    """
    order = np.argsort(g.half_edge_owner, kind="stable")
    if not np.array_equal(order, np.arange(order.size)):
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        g = Multigraph(g.n, g.half_edge_owner[order], rank[g.pairing[order]])
    core, traj, _ = _halfedge_process(g.degree, k, rng, record, fixed_pairing=g.pairing)
    return core, traj


def verify_core(g: Multigraph, k: int, result: CoreResult) -> None:
    """Check ``result`` is the k-core of ``g``.

    Core vertices must have at least ``k`` core neighbours, and the outside
    vertices must all be removable one at a time while having degree below
    ``k``; together these certify the maximal such set.
    """
    inside = np.zeros(g.n, dtype=bool)
    inside[result.core_vertices] = True
    owner = g.half_edge_owner
    partner = owner[g.pairing]
    core_deg = np.bincount(owner[inside[owner] & inside[partner]], minlength=g.n)
    if np.any(core_deg[inside] < k):
        raise AssertionError("core vertex with fewer than k core neighbours")
    start, nbr = _csr(g)
    deg = g.degree.copy()
    gone = np.zeros(g.n, dtype=bool)
    stack = [v for v in np.nonzero(~inside)[0].tolist() if deg[v] < k]
    queued = np.zeros(g.n, dtype=bool)
    queued[stack] = True
    while stack:
        v = stack.pop()
        gone[v] = True
        for u in nbr[start[v] : start[v + 1]]:
            if u == v or gone[u]:
                continue
            deg[u] -= 1
            if not inside[u] and not queued[u] and deg[u] < k:
                queued[u] = True
                stack.append(u)
    if not np.array_equal(gone, ~inside):
        raise AssertionError("core is not maximal")
    if _core_edges(g, inside) != result.e_core:
        raise AssertionError("edge count mismatch")
