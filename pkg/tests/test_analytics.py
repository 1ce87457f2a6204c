import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainstory.analytics import (
    TABLE_CAPTION,
    TTestVariant,
    build_report,
    group_vote_means,
    length_summary,
    regularized_incomplete_beta,
    report_table,
    split_by_length,
    two_sample_t_test,
)
from chainstory.errors import InsufficientSamples, ZeroVariance
from support import p_two_sided_by_quadrature

# The deployment-shaped 34-chain length histogram: 4 occupied buckets
# averaging 5.5 below the threshold, 6 buckets averaging 2 above it.
FIXTURE_HISTOGRAM = {2: 7, 3: 6, 4: 5, 5: 4, 6: 2, 7: 2, 8: 2, 9: 2, 10: 2, 11: 2}


def fixture_lengths() -> dict[str, int]:
    lengths = {}
    n = 0
    for length, count in FIXTURE_HISTOGRAM.items():
        for _ in range(count):
            lengths[f"c{n:03d}"] = length
            n += 1
    return lengths


# ----------------------------------------------------------------------
# length_summary

def test_length_summary_basic():
    summary = length_summary([2, 2, 5])
    assert summary.count == 3
    assert summary.mean_length == pytest.approx(3.0)
    assert summary.max_length == 5
    assert summary.histogram == {2: 2, 5: 1}


def test_length_summary_empty():
    summary = length_summary([])
    assert summary.count == 0
    assert summary.mean_length is None
    assert summary.max_length is None
    assert summary.histogram == {}


def test_length_summary_34_chain_fixture():
    lengths = list(fixture_lengths().values())
    summary = length_summary(lengths)
    assert summary.count == 34
    assert summary.histogram == FIXTURE_HISTOGRAM
    assert summary.max_length == 11
    assert sum(summary.histogram.values()) == summary.count


def test_length_summary_invariants_hold():
    data = [1, 1, 4, 4, 4, 9]
    summary = length_summary(data)
    assert sum(summary.histogram.values()) == summary.count
    weighted = sum(k * v for k, v in summary.histogram.items())
    assert summary.mean_length == pytest.approx(weighted / summary.count)


# ----------------------------------------------------------------------
# split_by_length

def test_split_partitions_at_threshold():
    split = split_by_length({"a": 3, "b": 7}, threshold=5)
    assert split.low == ("a",)
    assert split.high == ("b",)


def test_split_degenerate_high_group():
    split = split_by_length({"a": 2, "b": 3}, threshold=5)
    assert split.high == ()
    assert split.high_mean_bucket_count is None
    assert split.low_mean_bucket_count is not None


def test_split_fixture_bucket_means_exact():
    split = split_by_length(fixture_lengths(), threshold=5)
    assert split.low_bucket_counts == (7, 6, 5, 4)
    assert split.high_bucket_counts == (2, 2, 2, 2, 2, 2)
    assert split.low_mean_bucket_count == 5.5
    assert split.high_mean_bucket_count == 2.0
    # consistency: 4 buckets * 5.5 + 6 buckets * 2 = 34 chains
    assert 4 * 5.5 + 6 * 2 == 34
    assert len(split.low) + len(split.high) == 34


def test_split_counts_zero_buckets_inside_range():
    # low occupied at 2 and 5 only: range 2..5 includes two empty buckets
    split = split_by_length({"a": 2, "b": 2, "c": 5}, threshold=5)
    assert split.low_bucket_counts == (2, 0, 0, 1)
    assert split.low_mean_bucket_count == pytest.approx(0.75)


def test_split_conservation_any_threshold():
    lengths = {f"c{i}": (i % 9) + 1 for i in range(40)}
    for threshold in (1, 3, 5, 8, 12):
        split = split_by_length(lengths, threshold)
        assert len(split.low) + len(split.high) == 40
        assert set(split.low) | set(split.high) == set(lengths)
        assert not set(split.low) & set(split.high)


# ----------------------------------------------------------------------
# group_vote_means

def test_group_vote_means_basic():
    split = split_by_length({"a": 2, "b": 3, "c": 7}, threshold=5)
    low, high = group_vote_means(split, {"a": [2], "b": [3], "c": [4]})
    assert low == pytest.approx(2.5)
    assert high == pytest.approx(4.0)


def test_group_vote_means_deployment_shaped_fixture():
    # pooled means 2.4 below the threshold and 23/6 (reported as 3.833) above
    split = split_by_length({"s1": 2, "s2": 3, "s3": 4, "s4": 5, "s5": 5, "L": 8},
                            threshold=5)
    tallies = {
        "s1": [2], "s2": [2], "s3": [2], "s4": [3], "s5": [3],
        "L": [4, 4, 4, 4, 4, 3],
    }
    low, high = group_vote_means(split, tallies)
    assert low == pytest.approx(2.4)
    assert high == pytest.approx(23 / 6)
    assert round(high, 3) == 3.833


def test_group_vote_means_identical_tallies_equal():
    split = split_by_length({"a": 1, "b": 9}, threshold=5)
    low, high = group_vote_means(split, {"a": [1, 2, 3], "b": [1, 2, 3]})
    assert low == high


def test_group_vote_means_empty_group_undefined():
    split = split_by_length({"a": 1}, threshold=5)
    low, high = group_vote_means(split, {"a": []})
    assert low is None and high is None


# ----------------------------------------------------------------------
# two_sample_t_test

def test_identical_samples_t_zero_p_one():
    result = two_sample_t_test([1, 2, 3], [1, 2, 3])
    assert result.t_statistic == 0
    assert result.p_value == 1.0


def test_hand_computed_example():
    # mean diff -3, pooled variance 1, t = -3 / sqrt(2/3), df = 4
    result = two_sample_t_test([1, 2, 3], [4, 5, 6])
    assert result.t_statistic == pytest.approx(-3 / math.sqrt(2 / 3), abs=1e-12)
    assert round(result.t_statistic, 4) == -3.6742
    assert result.degrees_of_freedom == 4
    oracle = p_two_sided_by_quadrature(result.t_statistic, 4)
    assert result.p_value == pytest.approx(oracle, abs=1e-9)


def test_p_values_match_quadrature_oracle():
    rng = random.Random(1)
    for variant in (TTestVariant.STUDENT_POOLED, TTestVariant.WELCH):
        for _ in range(25):
            a = [rng.gauss(0, 1) for _ in range(rng.randint(3, 12))]
            b = [rng.gauss(rng.uniform(-1.5, 1.5), rng.uniform(0.5, 2))
                 for _ in range(rng.randint(3, 12))]
            result = two_sample_t_test(a, b, variant)
            oracle = p_two_sided_by_quadrature(
                result.t_statistic, result.degrees_of_freedom
            )
            assert result.p_value == pytest.approx(oracle, abs=1e-9)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        two_sample_t_test([1.0], [1, 2, 3])
    with pytest.raises(InsufficientSamples):
        two_sample_t_test([1, 2], [4.0])


def test_zero_variance_equal_constants():
    with pytest.raises(ZeroVariance):
        two_sample_t_test([2, 2, 2], [2, 2])


def test_zero_variance_different_constants_gives_p_zero():
    result = two_sample_t_test([2, 2, 2], [5, 5, 5])
    assert math.isinf(result.t_statistic) and result.t_statistic < 0
    assert result.p_value == 0.0


def test_welch_differs_from_pooled_on_unequal_variances():
    a = [0.0, 0.1, -0.1, 0.05, -0.05]
    b = [1.0, 3.0, -2.0, 4.0, -3.5, 2.5]
    pooled = two_sample_t_test(a, b, TTestVariant.STUDENT_POOLED)
    welch = two_sample_t_test(a, b, TTestVariant.WELCH)
    assert pooled.degrees_of_freedom == 9
    assert welch.degrees_of_freedom != pooled.degrees_of_freedom
    for result in (pooled, welch):
        oracle = p_two_sided_by_quadrature(
            result.t_statistic, result.degrees_of_freedom
        )
        assert result.p_value == pytest.approx(oracle, abs=1e-9)


finite_floats = st.floats(min_value=-1e4, max_value=1e4,
                          allow_nan=False, allow_infinity=False)
sample = st.lists(finite_floats, min_size=2, max_size=20)


@given(sample, sample)
@settings(max_examples=60)
def test_sign_antisymmetry(a, b):
    try:
        forward = two_sample_t_test(a, b)
        backward = two_sample_t_test(b, a)
    except ZeroVariance:
        return
    assert forward.t_statistic == pytest.approx(-backward.t_statistic, rel=1e-12)
    assert forward.p_value == pytest.approx(backward.p_value, rel=1e-9)


@given(sample, sample, st.floats(min_value=0.01, max_value=100))
@settings(max_examples=60)
def test_scale_invariance(a, b, c):
    try:
        base = two_sample_t_test(a, b)
        scaled = two_sample_t_test([x * c for x in a], [x * c for x in b])
    except ZeroVariance:
        return
    if math.isinf(base.t_statistic):
        assert math.isinf(scaled.t_statistic)
        return
    assert scaled.t_statistic == pytest.approx(base.t_statistic, rel=1e-9, abs=1e-12)
    assert scaled.p_value == pytest.approx(base.p_value, rel=1e-9, abs=1e-12)


def test_p_monotone_in_t_magnitude():
    from chainstory.analytics import t_two_sided_p

    for df in (1, 2, 4, 10, 30.5):
        values = [t_two_sided_p(t, df) for t in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)]
        assert values == sorted(values, reverse=True)
        assert all(v0 > v1 for v0, v1 in zip(values, values[1:]))


def test_incomplete_beta_limits():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    # I_x(1,1) is the identity
    for x in (0.1, 0.5, 0.9):
        assert regularized_incomplete_beta(1.0, 1.0, x) == pytest.approx(x, abs=1e-12)


# ----------------------------------------------------------------------
# report and table export

def test_report_direction_fields_on_fixture():
    lengths = fixture_lengths()
    tallies = {c: [] for c in lengths}
    report = build_report(lengths, tallies, threshold=5)
    assert report.summary.count == 34
    assert report.split.low_mean_bucket_count == 5.5
    assert report.split.high_mean_bucket_count == 2.0
    assert report.vote_mean is None
    assert report.length_test is not None
    assert report.length_test.p_value < 0.05


def test_report_table_exact_rows():
    lengths = fixture_lengths()
    tallies = {c: [] for c in lengths}
    report = build_report(lengths, tallies, threshold=5)
    table = report_table(report)
    lines = table.strip().split("\n")
    assert lines[0] == TABLE_CAPTION
    assert len(lines) == 7
    labels = [line.split("\t")[0] for line in lines[1:]]
    assert labels == [
        "Average length of Image Chains",
        "Average number of Image chains of length <= 5",
        "Average number of Image Chains of length > 5",
        "Average number of votes for a story text",
        "Average votes for story texts for Image Chains of length <= 5",
        "Average votes for story texts for Image Chains of length > 5",
    ]
    values = dict(line.split("\t") for line in lines[1:])
    assert values["Average number of Image chains of length <= 5"] == "5.5"
    assert values["Average number of Image Chains of length > 5"] == "2"
    assert values["Average number of votes for a story text"] == "undefined"


def test_report_table_value_formatting():
    report = build_report({"a": 2, "b": 2, "c": 3}, {"a": [1], "b": [2], "c": []},
                          threshold=5)
    table = report_table(report)
    assert "\t2.3333\n" in table  # mean length trimmed to 4 decimals
    assert "\t1.5\n" in table  # vote mean


def test_report_errors_recorded_when_test_impossible():
    report = build_report({"a": 1}, {"a": []}, threshold=5)
    assert report.length_test is None
    assert report.length_test_error == "InsufficientSamples"
    assert report.votes_test is None
    assert report.votes_test_error == "InsufficientSamples"
