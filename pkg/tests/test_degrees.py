import math
from fractions import Fraction

import numpy as np
import pytest

from kcore_lab.degrees import (
    DegreeSequence,
    exp_moment,
    format_degree_sequence,
    parse_degree_sequence,
    read_degree_sequence,
    sample_degrees,
    total_variation,
    validate_sequence,
)
from kcore_lab.errors import DomainError, ParseError, SamplingError
from kcore_lab.theory import DegreeDistribution


def test_sequence_rejects_bad_values():
    with pytest.raises(DomainError):
        DegreeSequence([1, -1])
    with pytest.raises(DomainError):
        DegreeSequence([1.5, 2])
    with pytest.raises(DomainError):
        DegreeSequence([2**31])
    assert DegreeSequence([1.0, 3.0]).degrees.dtype == np.int64


def test_sequence_is_read_only():
    seq = DegreeSequence([1, 2, 3])
    with pytest.raises(ValueError):
        seq.degrees[0] = 5


@pytest.mark.parametrize(
    "degrees, pmf, mean, m",
    [([1, 1], {1: Fraction(1)}, 1.0, 1), ([3, 3, 3, 3], {3: Fraction(1)}, 3.0, 6)],
)
def test_diagnostics_examples(degrees, pmf, mean, m):
    diag = validate_sequence(DegreeSequence(degrees))
    assert diag.empirical_pmf == pmf
    assert diag.mean_degree == mean
    assert diag.m == m
    assert not diag.odd_sum


def test_diagnostics_flags_odd_sum():
    assert validate_sequence(DegreeSequence([1, 2])).odd_sum


def test_diagnostics_moments():
    diag = validate_sequence(DegreeSequence([0, 1, 2, 3]))
    assert diag.second_moment == pytest.approx(14 / 4)
    assert diag.third_moment == pytest.approx(36 / 8)
    assert diag.max_degree == 3
    assert np.allclose(diag.pmf_array(), [0.25] * 4)


def test_poisson_sample_mean(rng):
    dist = DegreeDistribution.poisson(4.0)
    hits = 0
    for seed in range(100):
        seq = sample_degrees(dist, 10**5, np.random.default_rng(seed))
        hits += abs(seq.total / seq.n - 4.0) <= 0.05
    assert hits >= 99


def test_sample_point_mass_even_needs_no_fix(rng):
    seq = sample_degrees(DegreeDistribution.point_mass(2), 5, rng)
    assert seq.degrees.tolist() == [2] * 5


def test_sample_point_mass_odd_is_fixed(rng):
    seq = sample_degrees(DegreeDistribution.point_mass(1), 5, rng)
    assert sorted(seq.degrees.tolist()) == [1, 1, 1, 1, 2]
    assert seq.is_even


def test_parity_fix_changes_one_degree_only_when_needed():
    dist = DegreeDistribution.poisson(3.0)
    for seed in range(200):
        raw = np.random.default_rng(seed).poisson(3.0, size=51)
        fixed = sample_degrees(dist, 51, np.random.default_rng(seed)).degrees
        diff = fixed - raw
        if raw.sum() % 2:
            assert np.count_nonzero(diff) == 1 and diff.sum() == 1
        else:
            assert np.count_nonzero(diff) == 0


def test_parity_reject(rng):
    seq = sample_degrees(DegreeDistribution.poisson(3.0), 101, rng, parity="reject")
    assert seq.is_even
    with pytest.raises(SamplingError):
        sample_degrees(DegreeDistribution.point_mass(1), 3, rng, parity="reject")


def test_sample_explicit_support(rng):
    dist = DegreeDistribution.explicit([0.0, 0.0, 0.3, 0.0, 0.7])
    seq = sample_degrees(dist, 10**4, rng)
    assert set(np.unique(seq.degrees).tolist()) <= {2, 3, 4, 5}


def test_total_variation_converges():
    dist = DegreeDistribution.poisson(4.0)
    good = sum(
        total_variation(sample_degrees(dist, 10**6, np.random.default_rng(s)), dist) <= 0.01
        for s in range(100)
    )
    assert good >= 95


def test_exp_moment_examples():
    assert exp_moment(DegreeSequence([0, 0, 0]), 1.0) == 1.0
    assert exp_moment(DegreeSequence([1, 1]), math.log(2)) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        exp_moment(DegreeSequence([1, 1]), 0.0)


def test_exp_moment_poisson_mgf(rng):
    seq = sample_degrees(DegreeDistribution.poisson(4.0), 10**5, rng)
    # at alpha=1 the summands have variance exp(4(e^2-1)), far too heavy to
    # concentrate at this n; alpha=1/2 has a relative sd near 0.7%
    expected = math.exp(4 * (math.exp(0.5) - 1))
    assert exp_moment(seq, 0.5) == pytest.approx(expected, rel=0.05)
    direct = np.mean(np.exp(seq.degrees.astype(float)))
    assert exp_moment(seq, 1.0) == pytest.approx(direct, rel=1e-12)


def test_parse_plain_and_hist():
    assert parse_degree_sequence("1 2\n3\n").degrees.tolist() == [1, 2, 3]
    hist = parse_degree_sequence("#hist\n2 3\n0 1\n")
    assert sorted(hist.degrees.tolist()) == [0, 2, 2, 2]


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_degree_sequence("1 2\nx\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_degree_sequence("#hist\n1 2\n1\n")
    with pytest.raises(ParseError):
        parse_degree_sequence("1 -2\n")


def test_round_trip(tmp_path, rng):
    seq = sample_degrees(DegreeDistribution.poisson(3.0), 200, rng)
    for hist in (False, True):
        path = tmp_path / f"seq{hist}.txt"
        path.write_text(format_degree_sequence(seq, hist=hist))
        back = read_degree_sequence(path)
        if hist:
            assert sorted(back.degrees.tolist()) == sorted(seq.degrees.tolist())
        else:
            assert back == seq
