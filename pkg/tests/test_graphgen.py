import itertools
import math
from collections import Counter

import numpy as np
import pytest

from kcore_lab.degrees import DegreeSequence, sample_degrees
from kcore_lab.errors import DomainError, ParityError, ParseError, RangeError, RejectionError
from kcore_lab.graphgen import (
    Multigraph,
    format_edge_list,
    is_simple,
    random_matching,
    read_edge_list,
    sample_gnm,
    sample_gnp,
    sample_simple,
)
from kcore_lab.theory import DegreeDistribution


def _edge_key(g):
    return tuple(sorted(tuple(sorted(e)) for e in g.edges().tolist()))


def _all_matchings(points):
    if not points:
        yield []
        return
    a, rest = points[0], points[1:]
    for i, b in enumerate(rest):
        for tail in _all_matchings(rest[:i] + rest[i + 1 :]):
            yield [(a, b)] + tail


def test_matching_trivial_cases(rng):
    g = random_matching(DegreeSequence([1, 1]), rng)
    assert g.edges().tolist() == [[0, 1]]
    g = random_matching(DegreeSequence([2]), rng)
    assert g.edges().tolist() == [[0, 0]]
    g.check()


def test_matching_odd_sum_raises(rng):
    with pytest.raises(ParityError):
        random_matching(DegreeSequence([1, 2]), rng)


@pytest.mark.parametrize("degrees", [[2, 2], [1, 1, 1, 1], [3, 1]])
def test_matching_uniform_against_enumeration(degrees, rng):
    seq = DegreeSequence(degrees)
    owner = np.repeat(np.arange(seq.n), seq.degrees)
    exact = Counter()
    all_m = list(_all_matchings(list(range(owner.size))))
    for mt in all_m:
        key = tuple(sorted(tuple(sorted((int(owner[a]), int(owner[b])))) for a, b in mt))
        exact[key] += 1
    trials = 10**5
    seen = Counter(_edge_key(random_matching(seq, rng)) for _ in range(trials))
    assert set(seen) <= set(exact)
    for key, count in exact.items():
        assert abs(seen[key] / trials - count / len(all_m)) <= 0.01


def test_two_two_outcomes(rng):
    trials = 30000
    parallel = 0
    for _ in range(trials):
        rep = is_simple(random_matching(DegreeSequence([2, 2]), rng))
        parallel += rep.multi_edges == 1
    assert abs(parallel / trials - 2 / 3) <= 0.01


def test_simplicity_reports():
    assert is_simple(Multigraph.from_edges(2, [[0, 1]])).is_simple
    loop = is_simple(Multigraph.from_edges(1, [[0, 0]]))
    assert loop.loops == 1 and not loop.is_simple
    multi = is_simple(Multigraph.from_edges(2, [[0, 1], [1, 0]]))
    assert multi.multi_edges == 1 and multi.loops == 0


def test_sample_simple_examples(rng):
    for _ in range(20):
        _, tries = sample_simple(DegreeSequence([1, 1]), rng)
        assert tries == 1
    with pytest.raises(RejectionError):
        sample_simple(DegreeSequence([2]), rng, max_tries=50)


def test_sample_simple_acceptance_rate():
    # P(simple) -> exp(-nu/2 - nu^2/4), nu = E d(d-1) / E d
    dist = DegreeDistribution.poisson(2.0)
    tries = []
    for seed in range(100):
        gen = np.random.default_rng(seed)
        seq = sample_degrees(dist, 10**4, gen)
        g, t = sample_simple(seq, gen)
        assert is_simple(g).is_simple
        assert np.array_equal(g.degree, seq.degrees)
        tries.append(t)
    assert 1 <= np.mean(tries) <= 20
    assert np.mean(tries) == pytest.approx(math.exp(2.0), rel=0.3)


def test_poisson4_simple_probability():
    gen = np.random.default_rng(11)
    seq = sample_degrees(DegreeDistribution.poisson(4.0), 10**4, gen)
    d = seq.degrees.astype(float)
    nu = float(np.sum(d * (d - 1)) / np.sum(d))
    draws = 4000
    ok = sum(is_simple(random_matching(seq, gen)).is_simple for _ in range(draws))
    expected = math.exp(-nu / 2 - nu * nu / 4)
    assert abs(ok / draws - expected) <= 3 * math.sqrt(expected / draws)


def test_loop_count_law(rng):
    seq = DegreeSequence(np.full(10**5, 3))
    loops = []
    for _ in range(400):
        g = random_matching(seq, rng)
        loops.append(int(np.sum(g.half_edge_owner == g.half_edge_owner[g.pairing])) // 2)
    # nu = 2 for 3-regular, so the loop count is about Poisson(1)
    assert np.mean(loops) == pytest.approx(1.0, rel=0.15)


def test_gnm_examples(rng):
    assert _edge_key(sample_gnm(2, 1, rng)) == ((0, 1),)
    assert _edge_key(sample_gnm(3, 3, rng)) == ((0, 1), (0, 2), (1, 2))
    with pytest.raises(DomainError):
        sample_gnm(3, 4, rng)


def test_gnm_is_simple_and_uniform(rng):
    counts = Counter(_edge_key(sample_gnm(4, 2, rng)) for _ in range(30000))
    assert len(counts) == math.comb(6, 2)
    freq = np.array(list(counts.values())) / 30000
    assert np.all(np.abs(freq - 1 / 15) <= 0.01)
    g = sample_gnm(1000, 5000, rng)
    assert is_simple(g).is_simple and g.m == 5000


def test_gnm_degree_law(rng):
    g = sample_gnm(10**5, 2 * 10**5, rng)
    emp = np.bincount(g.degree) / g.n
    ref = DegreeDistribution.poisson(4.0).probs
    size = max(emp.size, ref.size)
    tv = 0.5 * np.abs(np.pad(emp, (0, size - emp.size)) - np.pad(ref, (0, size - ref.size))).sum()
    assert tv <= 0.01


def test_gnp_small_lambda_no_edges(rng):
    trials = 20000
    empty = sum(sample_gnp(10, 0.01, rng).m == 0 for _ in range(trials))
    assert abs(empty / trials - (1 - 0.01 / 10) ** 45) <= 0.01


def test_gnp_single_pair(rng):
    trials = 40000
    hits = sum(sample_gnp(2, 1.0, rng).m for _ in range(trials))
    assert abs(hits / trials - 0.5) <= 0.01


def test_gnp_mean_degree(rng):
    g = sample_gnp(10**5, 4.0, rng)
    assert abs(2 * g.m / g.n - 4.0) <= 0.05
    assert is_simple(g).is_simple


def test_edge_list_parsing():
    g = read_edge_list("2 1\n0 1\n")
    assert g.edges().tolist() == [[0, 1]]
    loop = read_edge_list("1 1\n0 0\n")
    assert loop.degree.tolist() == [2]
    with pytest.raises(RangeError, match="line 2"):
        read_edge_list("2 1\n0 5\n")
    with pytest.raises(ParseError, match="line 2"):
        read_edge_list("3 2\n0 x\n1 2\n")
    with pytest.raises(ParseError):
        read_edge_list("3 2\n0 1\n")


def test_edge_list_round_trip(rng):
    g = random_matching(sample_degrees(DegreeDistribution.poisson(3.0), 300, rng), rng)
    back = read_edge_list(format_edge_list(g))
    assert _edge_key(back) == _edge_key(g)
    assert np.array_equal(back.degree, g.degree)


def test_from_edges_groups_half_edges():
    g = Multigraph.from_edges(3, [[2, 0], [1, 2], [0, 0]])
    g.check()
    assert np.all(np.diff(g.half_edge_owner) >= 0)
    assert sorted(map(tuple, np.sort(g.edges(), axis=1).tolist())) == [(0, 0), (0, 2), (1, 2)]


def test_all_small_matchings_are_involutions(rng):
    for degrees in itertools.product(range(4), repeat=3):
        seq = DegreeSequence(degrees)
        if not seq.is_even:
            continue
        g = random_matching(seq, rng)
        g.check()
        assert np.array_equal(g.degree, seq.degrees)
