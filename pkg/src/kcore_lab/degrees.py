"""Finite degree sequences: construction, sampling, diagnostics and file IO."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from kcore_lab.errors import DomainError, ParseError, SamplingError
from kcore_lab.theory import DegreeDistribution

MAX_DEGREE = 2**31 - 1
MAX_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    """Degrees ``d_1..d_n``.  An odd total is allowed here; matching rejects it."""

    degrees: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.degrees)
        if d.ndim != 1:
            raise DomainError("degrees must be a 1-d sequence")
        if d.size and not np.issubdtype(d.dtype, np.integer):
            if not np.all(np.equal(np.mod(d, 1), 0)):
                raise DomainError("degrees must be integers")
        d = d.astype(np.int64)
        if np.any(d < 0):
            raise DomainError("degrees must be non-negative")
        if np.any(d > MAX_DEGREE):
            raise DomainError(f"degrees above {MAX_DEGREE} are not supported")
        d.setflags(write=False)
        object.__setattr__(self, "degrees", d)

    @property
    def n(self) -> int:
        return int(self.degrees.size)

    @property
    def total(self) -> int:
        return int(self.degrees.sum())

    @property
    def m(self) -> int:
        return self.total // 2

    @property
    def is_even(self) -> bool:
        return self.total % 2 == 0

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, DegreeSequence) and np.array_equal(self.degrees, other.degrees)

    __hash__ = None


@dataclass(frozen=True)
class SequenceDiagnostics:
    n: int
    m: int
    counts: dict
    empirical_pmf: dict
    mean_degree: float
    second_moment: float
    third_moment: float
    max_degree: int
    odd_sum: bool

    def pmf_array(self) -> np.ndarray:
        out = np.zeros(self.max_degree + 1)
        for r, c in self.counts.items():
            out[r] = c / self.n
        return out


def validate_sequence(seq: DegreeSequence) -> SequenceDiagnostics:
    """Finite-n surrogates of the regularity conditions.

    Odd degree sums are flagged, not rejected.
    """
    d = seq.degrees
    n = seq.n
    if n == 0:
        return SequenceDiagnostics(0, 0, {}, {}, 0.0, 0.0, 0.0, 0, False)
    values, counts = np.unique(d, return_counts=True)
    count_map = {int(r): int(c) for r, c in zip(values, counts)}
    pmf = {r: Fraction(c, n) for r, c in count_map.items()}
    df = d.astype(float)
    return SequenceDiagnostics(
        n=n,
        m=seq.m,
        counts=count_map,
        empirical_pmf=pmf,
        mean_degree=seq.total / n,
        second_moment=float(np.sum(df * df)) / n,
        third_moment=float(np.sum(df**3)) / n**1.5,
        max_degree=int(d.max()),
        odd_sum=not seq.is_even,
    )


def exp_moment(seq: DegreeSequence, alpha: float) -> float:
    """``sum_i exp(alpha d_i) / n``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if seq.n == 0:
        raise DomainError("empty sequence")
    return float(np.mean(np.exp(alpha * seq.degrees.astype(float))))


def total_variation(seq: DegreeSequence, dist: DegreeDistribution) -> float:
    """TV distance between the empirical degree law and ``dist``."""
    counts = np.bincount(seq.degrees)
    size = max(counts.size, dist.probs.size)
    emp = np.zeros(size)
    emp[: counts.size] = counts / seq.n
    ref = np.zeros(size)
    ref[: dist.probs.size] = dist.probs
    # mass of dist beyond its stored support is below 1e-17
    return 0.5 * float(np.abs(emp - ref).sum())


def _draw(dist: DegreeDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    if dist.is_poisson:
        return rng.poisson(dist.poisson_lambda, size=n)
    return rng.choice(dist.probs.size, size=n, p=dist.probs)


def sample_degrees(
    dist: DegreeDistribution, n: int, rng: np.random.Generator, parity: str = "fix"
) -> DegreeSequence:
    """Draw ``n`` i.i.d. degrees from ``dist`` with an even total.

    ``parity="fix"`` bumps one uniformly chosen degree by one when the sum is
    odd; ``parity="reject"`` redraws the whole sequence (at most 100 times).
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if parity not in ("fix", "reject"):
        raise DomainError(f"unknown parity mode {parity!r}")
    d = _draw(dist, n, rng)
    if parity == "fix":
        if d.sum() % 2:
            d[rng.integers(n)] += 1
        return DegreeSequence(d)
    for _ in range(MAX_REDRAWS):
        if d.sum() % 2 == 0:
            return DegreeSequence(d)
        d = _draw(dist, n, rng)
    raise SamplingError(f"odd degree sum in {MAX_REDRAWS} redraws")


def parse_degree_sequence(text: str) -> DegreeSequence:
    """Whitespace separated degrees, or ``degree count`` lines after ``#hist``."""
    lines = text.splitlines()
    first = next((ln.strip() for ln in lines if ln.strip()), "")
    if first == "#hist":
        degrees = []
        seen = False
        for no, line in enumerate(lines, 1):
            tok = line.split()
            if not tok:
                continue
            if not seen and tok == ["#hist"]:
                seen = True
                continue
            if len(tok) != 2:
                raise ParseError("expected 'degree count'", no)
            try:
                r, c = int(tok[0]), int(tok[1])
            except ValueError:
                raise ParseError(f"non-integer token in {line.strip()!r}", no) from None
            if r < 0 or c < 0:
                raise ParseError("negative degree or count", no)
            degrees.append(np.full(c, r, dtype=np.int64))
        return DegreeSequence(np.concatenate(degrees) if degrees else np.zeros(0, np.int64))

    values = []
    for no, line in enumerate(lines, 1):
        for tok in line.split():
            try:
                v = int(tok)
            except ValueError:
                raise ParseError(f"non-integer token {tok!r}", no) from None
            if v < 0:
                raise ParseError("negative degree", no)
            values.append(v)
    return DegreeSequence(np.array(values, dtype=np.int64))


def read_degree_sequence(path) -> DegreeSequence:
    with open(path) as fh:
        return parse_degree_sequence(fh.read())


def format_degree_sequence(seq: DegreeSequence, hist: bool = False) -> str:
    if not hist:
        return "\n".join(str(int(x)) for x in seq.degrees) + "\n"
    counts = np.bincount(seq.degrees) if seq.n else np.zeros(0, int)
    rows = [f"{r} {c}" for r, c in enumerate(counts) if c]
    return "#hist\n" + "\n".join(rows) + "\n"
