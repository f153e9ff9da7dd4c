"""Random multigraphs: configuration model, simplicity, G(n, m) and G(n, p)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from kcore_lab.degrees import DegreeSequence
from kcore_lab.errors import DomainError, ParityError, ParseError, RangeError, RejectionError


@dataclass(frozen=True, eq=False)
class Multigraph:
    """Half-edge incidence structure.

    Half-edges are numbered contiguously by vertex; ``pairing`` is a
    fixed-point-free involution on those numbers.
    """

    n: int
    half_edge_owner: np.ndarray
    pairing: np.ndarray

    def __post_init__(self):
        owner = np.asarray(self.half_edge_owner, dtype=np.int64)
        pairing = np.asarray(self.pairing, dtype=np.int64)
        if owner.shape != pairing.shape or owner.size % 2:
            raise DomainError("need an even number of half-edges with one partner each")
        for a in (owner, pairing):
            a.setflags(write=False)
        object.__setattr__(self, "half_edge_owner", owner)
        object.__setattr__(self, "pairing", pairing)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Multigraph":
        """Build from an ``(m, 2)`` array of endpoints; loops and repeats allowed."""
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise DomainError("edge endpoint out of range")
        raw_owner = e.reshape(-1)
        order = np.argsort(raw_owner, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        # raw half-edge 2i pairs with 2i+1; relabel so ids are grouped by vertex
        pairing = rank[np.arange(raw_owner.size) ^ 1][order]
        return cls(n, raw_owner[order], pairing)

    @property
    def m(self) -> int:
        return self.half_edge_owner.size // 2

    @property
    def degree(self) -> np.ndarray:
        return np.bincount(self.half_edge_owner, minlength=self.n)

    def edges(self) -> np.ndarray:
        """One ``(u, v)`` row per edge, in half-edge order."""
        h = np.arange(self.pairing.size)
        first = h < self.pairing
        return np.stack([self.half_edge_owner[first], self.half_edge_owner[self.pairing[first]]], axis=1)

    def check(self) -> None:
        h = np.arange(self.pairing.size)
        if np.any(self.pairing == h) or not np.array_equal(self.pairing[self.pairing], h):
            raise DomainError("pairing is not a fixed-point-free involution")


@dataclass(frozen=True)
class SimplicityReport:
    loops: int
    multi_edges: int

    @property
    def is_simple(self) -> bool:
        return self.loops == 0 and self.multi_edges == 0


def random_matching(seq: DegreeSequence, rng: np.random.Generator) -> Multigraph:
    """Configuration model: a uniformly random perfect matching of the half-edges."""
    if not seq.is_even:
        raise ParityError("degree sum is odd")
    owner = np.repeat(np.arange(seq.n, dtype=np.int64), seq.degrees)
    perm = rng.permutation(owner.size)
    pairing = np.empty(owner.size, dtype=np.int64)
    pairing[perm[0::2]] = perm[1::2]
    pairing[perm[1::2]] = perm[0::2]
    return Multigraph(seq.n, owner, pairing)


def is_simple(g: Multigraph) -> SimplicityReport:
    e = g.edges()
    loop = e[:, 0] == e[:, 1]
    rest = np.sort(e[~loop], axis=1)
    keys = rest[:, 0] * max(g.n, 1) + rest[:, 1]
    multi = keys.size - np.unique(keys).size
    return SimplicityReport(int(loop.sum()), int(multi))


def sample_simple(
    seq: DegreeSequence, rng: np.random.Generator, max_tries: int = 1000
) -> tuple[Multigraph, int]:
    """Rejection-sample the configuration model until it is simple.

    Returns the graph and the number of matchings drawn.
    """
    if seq.n and float(np.mean(seq.degrees.astype(float) ** 2)) > 50:
        warnings.warn("large second moment: acceptance probability may be tiny", RuntimeWarning)
    for tries in range(1, max_tries + 1):
        g = random_matching(seq, rng)
        if is_simple(g).is_simple:
            return g, tries
    raise RejectionError(max_tries)


def sample_gnm(n: int, m: int, rng: np.random.Generator) -> Multigraph:
    """Uniform simple graph with ``n`` vertices and ``m`` edges.

    Draws uniform vertex pairs, discards loops and repeats, and keeps the
    first ``m`` distinct ones in draw order.
    """
    if n < 0 or m < 0:
        raise DomainError("n and m must be non-negative")
    if m > n * (n - 1) // 2:
        raise DomainError(f"m={m} exceeds n(n-1)/2 for n={n}")
    keys = np.zeros(0, dtype=np.int64)
    while keys.size < m:
        need = m - keys.size
        batch = int(need * 1.1) + 16
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        ok = u != v
        lo = np.minimum(u[ok], v[ok])
        hi = np.maximum(u[ok], v[ok])
        new = lo * n + hi
        uniq, first = np.unique(new, return_index=True)
        unseen = ~np.isin(uniq, keys)
        fresh = uniq[unseen][np.argsort(first[unseen], kind="stable")]
        keys = np.concatenate([keys, fresh[:need]])
    edges = np.stack([keys // max(n, 1), keys % max(n, 1)], axis=1)
    return Multigraph.from_edges(n, edges)


def sample_gnp(n: int, lam: float, rng: np.random.Generator) -> Multigraph:
    """``G(n, lam/n)``: binomial edge count, then a uniform ``G(n, M)``."""
    if not 0 < lam < n:
        raise DomainError("need 0 < lambda < n")
    pairs = n * (n - 1) // 2
    count = int(rng.binomial(pairs, lam / n))
    return sample_gnm(n, count, rng)


def format_edge_list(g: Multigraph) -> str:
    """Header ``n m`` then one ``u v`` line per edge (loops as ``u u``)."""
    e = g.edges()
    body = "".join(f"{u} {v}\n" for u, v in e.tolist())
    return f"{g.n} {g.m}\n" + body


def write_edge_list(g: Multigraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_edge_list(g))


def read_edge_list(text: str) -> Multigraph:
    lines = [(no, ln.split()) for no, ln in enumerate(text.splitlines(), 1)]
    lines = [(no, tok) for no, tok in lines if tok and not tok[0].startswith("#")]
    if not lines:
        raise ParseError("missing 'n m' header", 1)
    no, head = lines[0]
    if len(head) != 2:
        raise ParseError("header must be 'n m'", no)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("header must be two integers", no) from None
    if n < 0 or m < 0:
        raise ParseError("negative n or m", no)
    body = lines[1:]
    if len(body) != m:
        line = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else no + 1)
        raise ParseError(f"expected {m} edges, found {len(body)}", line)
    edges = np.empty((m, 2), dtype=np.int64)
    for i, (no, tok) in enumerate(body):
        if len(tok) != 2:
            raise ParseError("edge line must be 'u v'", no)
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise ParseError("edge endpoints must be integers", no) from None
        if not (0 <= u < n and 0 <= v < n):
            raise RangeError(f"vertex index out of range for n={n}", no)
        edges[i] = (u, v)
    return Multigraph.from_edges(n, edges)
