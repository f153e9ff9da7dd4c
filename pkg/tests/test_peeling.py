import math

import numpy as np
import pytest

from kcore_lab.degrees import DegreeSequence, sample_degrees
from kcore_lab.errors import DomainError, SizeError
from kcore_lab.graphgen import Multigraph, random_matching, sample_gnp
from kcore_lab.peeling import (
    brute_force_core,
    peel_bucket,
    peel_halfedge,
    peel_halfedge_fixed,
    peel_halfedge_realized,
    verify_core,
)
from kcore_lab.stochastics import trajectory_sup
from kcore_lab.theory import DegreeDistribution, p_hat, predict_core

TRIANGLE = Multigraph.from_edges(3, [[0, 1], [1, 2], [2, 0]])
PATH3 = Multigraph.from_edges(3, [[0, 1], [1, 2]])
K4_MINUS = Multigraph.from_edges(4, [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3]])
STAR = Multigraph.from_edges(5, [[0, i] for i in range(1, 5)])


def _random_multigraph(gen, n_max, mean_max=5.0):
    n = int(gen.integers(1, n_max + 1))
    d = gen.poisson(gen.uniform(0.5, mean_max), size=n)
    if d.sum() % 2:
        d[gen.integers(n)] += 1
    return random_matching(DegreeSequence(d), gen)


@pytest.mark.parametrize(
    "g, k, v, e",
    [(TRIANGLE, 2, 3, 3), (PATH3, 2, 0, 0), (K4_MINUS, 3, 0, 0), (STAR, 2, 0, 0)],
)
def test_small_cores(g, k, v, e):
    for finder in (peel_bucket, brute_force_core):
        core = finder(g, k)
        assert (core.v_core, core.e_core) == (v, e)
        verify_core(g, k, core)


def test_loops_count_twice():
    g = Multigraph.from_edges(2, [[0, 0], [0, 1]])
    assert peel_bucket(g, 3).core_vertices.tolist() == []
    assert peel_bucket(g, 2).core_vertices.tolist() == [0]
    single = Multigraph.from_edges(1, [[0, 0]])
    assert peel_bucket(single, 2).v_core == 1
    assert brute_force_core(single, 2).v_core == 1


def test_k4_minus_edge_has_2_core():
    assert peel_bucket(K4_MINUS, 2).v_core == 4


def test_brute_force_size_limit(rng):
    g = random_matching(DegreeSequence(np.full(18, 2)), rng)
    with pytest.raises(SizeError):
        brute_force_core(g, 2)


def test_peel_bucket_matches_brute_force(rng):
    for _ in range(300):
        g = _random_multigraph(rng, 10)
        k = int(rng.integers(1, 5))
        assert peel_bucket(g, k).same_core(brute_force_core(g, k))


def test_orders_agree(rng):
    for _ in range(100):
        g = _random_multigraph(rng, 200)
        k = int(rng.integers(2, 5))
        ref = peel_bucket(g, k, "fifo")
        verify_core(g, k, ref)
        assert peel_bucket(g, k, "lifo").same_core(ref)
        for _ in range(3):
            assert peel_bucket(g, k, "random", rng).same_core(ref)


def test_unknown_order():
    with pytest.raises(DomainError):
        peel_bucket(TRIANGLE, 2, "sideways")
    with pytest.raises(DomainError):
        peel_bucket(TRIANGLE, 2, "random")


def test_halfedge_regular_sequence_is_all_core(rng):
    for _ in range(50):
        core, traj, g = peel_halfedge_realized(DegreeSequence([2, 2, 2]), 2, rng)
        assert core.v_core == 3 and core.e_core == 3
        assert traj.tau == 0.0
        assert np.array_equal(g.degree, [2, 2, 2])


def test_halfedge_single_edge(rng):
    core, traj = peel_halfedge(DegreeSequence([1, 1]), 2, rng)
    assert core.is_empty and core.e_core == 0
    assert math.isfinite(traj.tau) and traj.tau > 0


def test_halfedge_record_none_has_no_clock(rng):
    _, traj = peel_halfedge(DegreeSequence([1, 1, 2]), 2, rng, record="none")
    assert math.isnan(traj.tau)


def test_halfedge_matches_bucket_on_realized_graph(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        d = rng.poisson(rng.uniform(1.0, 6.0), size=n)
        if d.sum() % 2:
            d[rng.integers(n)] += 1
        k = int(rng.integers(2, 5))
        core, _, g = peel_halfedge_realized(DegreeSequence(d), k, rng)
        assert np.array_equal(g.degree, d)
        assert core.same_core(peel_bucket(g, k))


def test_halfedge_fixed_matches_bucket(rng):
    for _ in range(300):
        g = _random_multigraph(rng, 100)
        k = int(rng.integers(2, 5))
        core, _ = peel_halfedge_fixed(g, k, rng)
        assert core.same_core(peel_bucket(g, k))


def test_halfedge_prediction_small_n():
    dist = DegreeDistribution.poisson(4.0)
    target = predict_core(dist, 3).v_frac
    hits = 0
    for seed in range(50):
        gen = np.random.default_rng(seed)
        core, _ = peel_halfedge(sample_degrees(dist, 10**4, gen), 3, gen)
        hits += abs(core.v_core / 10**4 - target) <= 0.03
    assert hits >= 45


def test_full_trajectory_structure(rng):
    dist = DegreeDistribution.poisson(4.0)
    seq = sample_degrees(dist, 20000, rng)
    core, traj = peel_halfedge(seq, 3, rng, record="full")
    assert traj.t[0] == 0.0 and np.all(np.diff(traj.t) >= 0)
    assert traj.L[-1] == -1 and np.all(traj.L[:-1] >= 0)
    assert traj.H1[-1] == core.v_core and traj.H[-1] == 2 * core.e_core
    assert traj.t[-1] == traj.tau
    # recording starts with the first light half-edge already in hand
    assert traj.L[0] + traj.H[0] == seq.total - 1
    # each event removes exactly two half-edges
    lh = traj.L[:-1] + traj.H[:-1]
    assert np.all(-np.diff(lh) == 2)
    sups = trajectory_sup(traj, dist, 3)
    assert max(sups.values()) <= 0.04
    assert abs(traj.tau + math.log(p_hat(dist, 3))) <= 0.1


def test_snapshots_partition_vertices(rng):
    seq = sample_degrees(DegreeDistribution.poisson(4.0), 5000, rng)
    times = [0.0, 0.05, 0.1, 1.0]
    _, traj = peel_halfedge(seq, 3, rng, record="full", snapshot_times=times)
    assert len(traj.bin_counts) == len(times)
    for counts in traj.bin_counts:
        assert counts.sum() == seq.n
    initial = np.bincount(seq.degrees, minlength=traj.bin_counts[0].size)
    # only the vertex owning the half-edge in hand has moved down one bin
    assert np.abs(traj.bin_counts[0] - initial).sum() <= 2


def test_gnp_core_is_verified(rng):
    g = sample_gnp(5000, 4.0, rng)
    for k in (2, 3, 4):
        verify_core(g, k, peel_bucket(g, k))


def test_verify_core_catches_errors():
    from kcore_lab.peeling import CoreResult

    with pytest.raises(AssertionError):
        verify_core(TRIANGLE, 2, CoreResult(2, np.array([0, 1]), 1))
    with pytest.raises(AssertionError):
        verify_core(TRIANGLE, 2, CoreResult(2, np.array([], dtype=np.int64), 0))


def test_explicit_law_supercritical_core():
    dist = DegreeDistribution.explicit([0.0, 0.2, 0.0, 0.3, 0.0, 0.5])
    pred = predict_core(dist, 3)
    assert 0 < pred.p_hat < 1
    v, e = [], []
    for seed in range(5):
        gen = np.random.default_rng(seed)
        g = random_matching(sample_degrees(dist, 10**5, gen), gen)
        core = peel_bucket(g, 3)
        v.append(core.v_core / g.n)
        e.append(core.e_core / g.n)
    assert abs(np.mean(v) - pred.v_frac) <= 0.01
    assert abs(np.mean(e) - pred.e_frac) <= 0.01
