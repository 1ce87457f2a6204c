"""Chain-length and vote analytics: summaries, cohort splits, t-tests.

The pipeline mirrors how the deployment data was studied: summarize the
chain-length distribution, split chains into a short cohort (length at or
below a threshold, default 5) and a long cohort (above it), compare the
two cohorts' per-length chain counts, and compare the story-vote tallies
pooled within each cohort. Both comparisons use a two-sample t-test whose
two-sided p-value is computed from the regularized incomplete beta
function (implemented here; tests check it against direct numerical
integration of the t density).

Bucket means: within a cohort, per-length chain counts are averaged over
the cohort's length range. The short cohort's range runs from its smallest
occupied length up to the threshold; the long cohort's runs from
threshold+1 up to its largest occupied length. Unoccupied lengths inside a
range count as zero.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from enum import Enum
from math import exp, inf, lgamma, log, log1p, sqrt
from typing import Mapping, Sequence

from .errors import InsufficientSamples, ZeroVariance

DEFAULT_LENGTH_THRESHOLD = 5


# ----------------------------------------------------------------------
# length summary

@dataclass(frozen=True)
class LengthSummary:
    count: int
    mean_length: float | None
    max_length: int | None
    histogram: dict[int, int]


def length_summary(lengths: Sequence[int]) -> LengthSummary:
    """Count, mean, max, and per-length histogram of chain lengths.

    An empty input yields count 0 with mean and max undefined (None).
    """
    histogram: dict[int, int] = {}
    for length in lengths:
        histogram[length] = histogram.get(length, 0) + 1
    count = len(lengths)
    if count == 0:
        return LengthSummary(count=0, mean_length=None, max_length=None, histogram={})
    return LengthSummary(
        count=count,
        mean_length=sum(lengths) / count,
        max_length=max(histogram),
        histogram=dict(sorted(histogram.items())),
    )


# ----------------------------------------------------------------------
# cohort split

@dataclass(frozen=True)
class CohortSplit:
    """Chains partitioned at a length threshold, with per-length bucket
    count vectors and their means for each side."""

    threshold: int
    low: tuple[str, ...]
    high: tuple[str, ...]
    low_bucket_counts: tuple[int, ...]
    high_bucket_counts: tuple[int, ...]
    low_mean_bucket_count: float | None
    high_mean_bucket_count: float | None


def _bucket_counts(lengths: Sequence[int], lo: int, hi: int) -> tuple[int, ...]:
    counts = {n: 0 for n in range(lo, hi + 1)}
    for length in lengths:
        counts[length] += 1
    return tuple(counts[n] for n in range(lo, hi + 1))


def split_by_length(
    lengths_by_chain: Mapping[str, int], threshold: int
) -> CohortSplit:
    """Partition chains into length <= threshold and length > threshold.

    Bucket ranges follow the module rule: low spans min occupied
    length..threshold, high spans threshold+1..max occupied length.
    An empty cohort has an empty count vector and an undefined mean.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    low_ids = tuple(c for c, n in lengths_by_chain.items() if n <= threshold)
    high_ids = tuple(c for c, n in lengths_by_chain.items() if n > threshold)
    low_lengths = [lengths_by_chain[c] for c in low_ids]
    high_lengths = [lengths_by_chain[c] for c in high_ids]

    low_counts: tuple[int, ...] = ()
    high_counts: tuple[int, ...] = ()
    if low_lengths:
        low_counts = _bucket_counts(low_lengths, min(low_lengths), threshold)
    if high_lengths:
        high_counts = _bucket_counts(high_lengths, threshold + 1, max(high_lengths))

    return CohortSplit(
        threshold=threshold,
        low=low_ids,
        high=high_ids,
        low_bucket_counts=low_counts,
        high_bucket_counts=high_counts,
        low_mean_bucket_count=statistics.fmean(low_counts) if low_counts else None,
        high_mean_bucket_count=statistics.fmean(high_counts) if high_counts else None,
    )


def group_vote_means(
    split: CohortSplit, tallies: Mapping[str, Sequence[int]]
) -> tuple[float | None, float | None]:
    """Mean story-vote tally pooled over each cohort's stories.

    ``tallies`` maps chain id to the active tallies of that chain's
    stories (possibly empty). A cohort with no stories yields None.
    """
    low_pool = [t for c in split.low for t in tallies.get(c, [])]
    high_pool = [t for c in split.high for t in tallies.get(c, [])]
    low_mean = statistics.fmean(low_pool) if low_pool else None
    high_mean = statistics.fmean(high_pool) if high_pool else None
    return low_mean, high_mean


# ----------------------------------------------------------------------
# two-sample t-test

class TTestVariant(Enum):
    STUDENT_POOLED = "student_pooled"
    WELCH = "welch"


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    variant: TTestVariant


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Lentz's algorithm for the continued fraction of I_x(a, b).
    max_iterations = 400
    eps = 3e-16
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        coeff = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coeff * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coeff / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coeff = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coeff * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coeff / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), computed by continued fraction with the symmetry switch
    at x = (a+1)/(a+b+2) for numerical stability."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x)
    )
    front = exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value for a t statistic: P(|T_df| >= |t|)."""
    if t == 0.0:
        return 1.0
    if t in (inf, -inf):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def two_sample_t_test(
    a: Sequence[float],
    b: Sequence[float],
    variant: TTestVariant = TTestVariant.STUDENT_POOLED,
) -> TTestResult:
    """Two-sample t-test with a two-sided p-value.

    STUDENT_POOLED assumes equal variances (df = n1 + n2 - 2); WELCH does
    not (Welch-Satterthwaite df). Raises InsufficientSamples below two
    observations per sample and ZeroVariance when both samples are
    constant with equal means (t is undefined there). Constant samples
    with different means give an infinite t and p = 0.
    """
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise InsufficientSamples("each sample needs at least 2 observations")
    mean1, mean2 = statistics.fmean(a), statistics.fmean(b)
    var1 = statistics.variance(a, mean1)
    var2 = statistics.variance(b, mean2)
    diff = mean1 - mean2

    if variant is TTestVariant.STUDENT_POOLED:
        df = float(n1 + n2 - 2)
        pooled = ((n1 - 1) * var1 + (n2 - 1) * var2) / df
        denom = sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    else:
        se1, se2 = var1 / n1, var2 / n2
        denom = sqrt(se1 + se2)
        if se1 + se2 > 0.0:
            df = (se1 + se2) ** 2 / (
                se1**2 / (n1 - 1) + se2**2 / (n2 - 1)
            )
        else:
            df = float(n1 + n2 - 2)

    if denom == 0.0:
        if diff == 0.0:
            raise ZeroVariance("both samples are constant and equal")
        t = inf if diff > 0 else -inf
    else:
        t = diff / denom
    return TTestResult(
        t_statistic=t,
        degrees_of_freedom=df,
        p_value=t_two_sided_p(t, df),
        variant=variant,
    )


# ----------------------------------------------------------------------
# full report and table export

TABLE_CAPTION = "Analysis of the length of Image Chains and votes obtained by them."


@dataclass(frozen=True)
class AnalyticsReport:
    summary: LengthSummary
    split: CohortSplit
    vote_mean: float | None
    low_vote_mean: float | None
    high_vote_mean: float | None
    length_test: TTestResult | None
    length_test_error: str | None
    votes_test: TTestResult | None
    votes_test_error: str | None


def _guarded_test(a: Sequence[float], b: Sequence[float]):
    try:
        return two_sample_t_test(a, b), None
    except (InsufficientSamples, ZeroVariance) as exc:
        return None, exc.code


def build_report(
    lengths_by_chain: Mapping[str, int],
    tallies_by_chain: Mapping[str, Sequence[int]],
    threshold: int = DEFAULT_LENGTH_THRESHOLD,
) -> AnalyticsReport:
    """Run the full pipeline over a store snapshot.

    Compares low/high per-length bucket counts and low/high pooled story
    tallies; a comparison that cannot run (too few samples, degenerate
    variance) is reported as None with the blocking error's code.
    """
    summary = length_summary(list(lengths_by_chain.values()))
    split = split_by_length(lengths_by_chain, threshold)
    low_vote_mean, high_vote_mean = group_vote_means(split, tallies_by_chain)
    all_tallies = [t for tallies in tallies_by_chain.values() for t in tallies]
    vote_mean = statistics.fmean(all_tallies) if all_tallies else None

    length_test, length_err = _guarded_test(
        split.low_bucket_counts, split.high_bucket_counts
    )
    low_pool = [t for c in split.low for t in tallies_by_chain.get(c, [])]
    high_pool = [t for c in split.high for t in tallies_by_chain.get(c, [])]
    votes_test, votes_err = _guarded_test(low_pool, high_pool)

    return AnalyticsReport(
        summary=summary,
        split=split,
        vote_mean=vote_mean,
        low_vote_mean=low_vote_mean,
        high_vote_mean=high_vote_mean,
        length_test=length_test,
        length_test_error=length_err,
        votes_test=votes_test,
        votes_test_error=votes_err,
    )


def _fmt(value: float | None) -> str:
    if value is None:
        return "undefined"
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return text if text else "0"


def report_table(report: AnalyticsReport, delimiter: str = "\t") -> str:
    """Six-row delimited summary table (caption line, then label/value rows)."""
    t = report.split.threshold
    rows = [
        ("Average length of Image Chains", report.summary.mean_length),
        (f"Average number of Image chains of length <= {t}",
         report.split.low_mean_bucket_count),
        (f"Average number of Image Chains of length > {t}",
         report.split.high_mean_bucket_count),
        ("Average number of votes for a story text", report.vote_mean),
        (f"Average votes for story texts for Image Chains of length <= {t}",
         report.low_vote_mean),
        (f"Average votes for story texts for Image Chains of length > {t}",
         report.high_vote_mean),
    ]
    lines = [TABLE_CAPTION]
    lines += [f"{label}{delimiter}{_fmt(value)}" for label, value in rows]
    return "\n".join(lines) + "\n"


def _test_to_dict(test: TTestResult | None, error: str | None) -> dict:
    if test is None:
        return {"error": error}
    return {
        "t_statistic": test.t_statistic,
        "degrees_of_freedom": test.degrees_of_freedom,
        "p_value": test.p_value,
        "variant": test.variant.value,
    }


def report_to_dict(report: AnalyticsReport) -> dict:
    """JSON-friendly view of the report (service and simulator output)."""
    return {
        "count": report.summary.count,
        "mean_length": report.summary.mean_length,
        "max_length": report.summary.max_length,
        "histogram": {str(k): v for k, v in report.summary.histogram.items()},
        "threshold": report.split.threshold,
        "low_chain_count": len(report.split.low),
        "high_chain_count": len(report.split.high),
        "low_bucket_counts": list(report.split.low_bucket_counts),
        "high_bucket_counts": list(report.split.high_bucket_counts),
        "low_mean_bucket_count": report.split.low_mean_bucket_count,
        "high_mean_bucket_count": report.split.high_mean_bucket_count,
        "vote_mean": report.vote_mean,
        "low_vote_mean": report.low_vote_mean,
        "high_vote_mean": report.high_vote_mean,
        "length_t_test": _test_to_dict(report.length_test, report.length_test_error),
        "votes_t_test": _test_to_dict(report.votes_test, report.votes_test_error),
    }
