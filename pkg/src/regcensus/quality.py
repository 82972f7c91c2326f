"""Data-quality measures for a register-based census.

Four measures compare a register-based enumeration R against a
traditional reference census T:

    coverage rate      |T n R| / |T|       higher is better
    overcoverage rate  |R \\ T| / |R|       lower is better
    CHD (sex, age)     chi-square histogram distance between the two
                       category distributions, lower is better

The chi-square histogram distance here is

    chd_squared = 1/2 * sum_i (p_i - q_i)^2 / (p_i + q_i)

with chd its square root. Published comparisons usually print the
pre-square-root value, so both are reported; ranking uses the squared
form (the square root is monotone, so ranks agree either way).

A chi-square test for homogeneity (2 x n table, df = n - 1, no
continuity correction) accompanies each distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy.special import gammaincc

from .errors import DataError
from .frameworks import CensusPopulation
from .records import AGE_BIN_LABELS, ReferenceCensus

SEX_CATEGORIES = ("F", "M")

# (report attribute, higher is better)
RANKED_MEASURES = (
    ("coverage_rate", True),
    ("overcoverage_rate", False),
    ("chd_sex_squared", False),
    ("chd_age_squared", False),
)


@dataclass(frozen=True)
class CategoryDistribution:
    categories: tuple[str, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.categories) != len(self.counts):
            raise DataError("categories and counts differ in length")
        if any(c < 0 for c in self.counts):
            raise DataError("counts must be nonnegative")
        if sum(self.counts) == 0:
            raise DataError("distribution has no mass")

    @property
    def proportions(self) -> tuple[float, ...]:
        total = sum(self.counts)
        return tuple(c / total for c in self.counts)

    @classmethod
    def from_mapping(cls, counts: Mapping[str, int], categories: Sequence[str]) -> "CategoryDistribution":
        return cls(tuple(categories), tuple(counts.get(c, 0) for c in categories))


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class QualityReport:
    coverage_rate: float
    overcoverage_rate: float
    chd_sex_squared: float
    chd_sex: float
    chd_age_squared: float
    chd_age: float
    chi2_sex: Chi2Result
    chi2_age: Chi2Result
    counts: tuple[int, int, int, int]  # |T|, |R|, |T n R|, |R \ T|

    def as_dict(self) -> dict:
        t_size, r_size, t_and_r, r_not_t = self.counts
        return {
            "coverage_rate": self.coverage_rate,
            "overcoverage_rate": self.overcoverage_rate,
            "chd_sex_squared": self.chd_sex_squared,
            "chd_sex": self.chd_sex,
            "chd_age_squared": self.chd_age_squared,
            "chd_age": self.chd_age,
            "chi2_sex": {"statistic": self.chi2_sex.statistic, "df": self.chi2_sex.df, "p_value": self.chi2_sex.p_value},
            "chi2_age": {"statistic": self.chi2_age.statistic, "df": self.chi2_age.df, "p_value": self.chi2_age.p_value},
            "counts": {"t": t_size, "r": r_size, "t_and_r": t_and_r, "r_not_t": r_not_t},
        }


def coverage_rate(t_members: frozenset[str] | set[str], r_members: frozenset[str] | set[str]) -> float:
    """Share of the traditional census actually found in registers."""
    if not t_members:
        raise DataError("coverage rate is undefined for an empty traditional census")
    return len(t_members & r_members) / len(t_members)


def overcoverage_rate(t_members: frozenset[str] | set[str], r_members: frozenset[str] | set[str]) -> float:
    """Share of the register-based census absent from the traditional one."""
    if not r_members:
        raise DataError("overcoverage rate is undefined for an empty register census")
    return len(r_members - t_members) / len(r_members)


def coverage_rate_from_counts(t_and_r: int, t_size: int) -> float:
    if t_size <= 0:
        raise DataError("coverage rate is undefined for an empty traditional census")
    return t_and_r / t_size


def overcoverage_rate_from_counts(r_not_t: int, r_size: int) -> float:
    if r_size <= 0:
        raise DataError("overcoverage rate is undefined for an empty register census")
    return r_not_t / r_size


def chd_squared(p: CategoryDistribution, q: CategoryDistribution) -> float:
    """Pre-square-root chi-square histogram distance.

    Categories with zero mass on both sides contribute nothing (the 0/0
    term's limit). Symmetric in its arguments and bounded by [0, 1].
    """
    if p.categories != q.categories:
        raise DataError(
            f"distributions disagree on categories: {p.categories} vs {q.categories}"
        )
    total = 0.0
    for pi, qi in zip(p.proportions, q.proportions):
        if pi + qi == 0:
            continue
        total += (pi - qi) ** 2 / (pi + qi)
    return 0.5 * total


def chd(p: CategoryDistribution, q: CategoryDistribution) -> float:
    """Square root of chd_squared."""
    return math.sqrt(chd_squared(p, q))


def chi2_upper_tail(x: float, df: int) -> float:
    """P(X >= x) for a chi-square variable with df degrees of freedom,
    via the regularized upper incomplete gamma function."""
    if x < 0:
        raise DataError("chi-square statistic must be nonnegative")
    if df < 1:
        raise DataError("degrees of freedom must be positive")
    return float(gammaincc(df / 2.0, x / 2.0))


def chi2_homogeneity(counts_r: Sequence[int], counts_t: Sequence[int]) -> Chi2Result:
    """Two-sample chi-square test for homogeneity over a 2 x n table.

    Expected counts come from the row and column margins; df = n - 1.
    No continuity correction is applied.
    """
    if len(counts_r) != len(counts_t):
        raise DataError("samples have different numbers of categories")
    n = len(counts_r)
    if n < 2:
        raise DataError("homogeneity test needs at least 2 categories")
    row_r, row_t = sum(counts_r), sum(counts_t)
    grand = row_r + row_t
    if row_r == 0 or row_t == 0:
        raise DataError("each sample needs positive total count")
    statistic = 0.0
    for i, (a, b) in enumerate(zip(counts_r, counts_t)):
        column = a + b
        if column == 0:
            raise DataError(f"zero expected count in category index {i}")
        for observed, row_total in ((a, row_r), (b, row_t)):
            expected = row_total * column / grand
            statistic += (observed - expected) ** 2 / expected
    df = n - 1
    return Chi2Result(statistic=statistic, df=df, p_value=chi2_upper_tail(statistic, df))


def evaluate(population: CensusPopulation, reference: ReferenceCensus) -> QualityReport:
    """Score one enumerated population against the reference census.

    Both must live in the same de-identified id space and census year.
    Members joined without a pid count toward the population size but can
    never match the reference, which is exactly the overcoverage risk
    they carry.
    """
    if population.census_year != reference.census_year:
        raise DataError(
            f"census years differ: population {population.census_year}, reference {reference.census_year}"
        )
    t_size = len(reference.persons)
    if t_size == 0:
        raise DataError("reference census is empty")
    r_size = population.size
    if r_size == 0:
        raise DataError("population is empty")
    t_and_r = len(reference.persons & population.member_pids)
    return _assemble(
        t_size=t_size,
        r_size=r_size,
        t_and_r=t_and_r,
        sex_r={s: population.by_sex.get(s, 0) for s in SEX_CATEGORIES},
        sex_t=reference.sex_counts,
        age_r={a: population.by_age.get(a, 0) for a in AGE_BIN_LABELS},
        age_t=reference.age_counts,
    )


def evaluate_from_counts(
    t_size: int,
    r_size: int,
    t_and_r: int,
    sex_r: Mapping[str, int],
    sex_t: Mapping[str, int],
    age_r: Mapping[str, int],
    age_t: Mapping[str, int],
) -> QualityReport:
    """Score from published membership counts instead of member sets."""
    return _assemble(t_size, r_size, t_and_r, sex_r, sex_t, age_r, age_t)


def _occupied(counts_p: Sequence[int], counts_q: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Drop categories empty in both samples: the homogeneity test's
    expected counts are undefined there, while CHD simply skips them."""
    pairs = [(a, b) for a, b in zip(counts_p, counts_q) if a + b > 0]
    return tuple(a for a, _ in pairs), tuple(b for _, b in pairs)


def _assemble(t_size, r_size, t_and_r, sex_r, sex_t, age_r, age_t) -> QualityReport:
    sex_p = CategoryDistribution.from_mapping(sex_r, SEX_CATEGORIES)
    sex_q = CategoryDistribution.from_mapping(sex_t, SEX_CATEGORIES)
    age_p = CategoryDistribution.from_mapping(age_r, AGE_BIN_LABELS)
    age_q = CategoryDistribution.from_mapping(age_t, AGE_BIN_LABELS)
    chd2_sex = chd_squared(sex_p, sex_q)
    chd2_age = chd_squared(age_p, age_q)
    return QualityReport(
        coverage_rate=coverage_rate_from_counts(t_and_r, t_size),
        overcoverage_rate=overcoverage_rate_from_counts(r_size - t_and_r, r_size),
        chd_sex_squared=chd2_sex,
        chd_sex=math.sqrt(chd2_sex),
        chd_age_squared=chd2_age,
        chd_age=math.sqrt(chd2_age),
        chi2_sex=chi2_homogeneity(*_occupied(sex_p.counts, sex_q.counts)),
        chi2_age=chi2_homogeneity(*_occupied(age_p.counts, age_q.counts)),
        counts=(t_size, r_size, t_and_r, r_size - t_and_r),
    )


def report_from_dict(raw: Mapping) -> QualityReport:
    """Rebuild a QualityReport from the JSON shape of as_dict()."""
    counts = raw["counts"]
    return QualityReport(
        coverage_rate=raw["coverage_rate"],
        overcoverage_rate=raw["overcoverage_rate"],
        chd_sex_squared=raw["chd_sex_squared"],
        chd_sex=raw["chd_sex"],
        chd_age_squared=raw["chd_age_squared"],
        chd_age=raw["chd_age"],
        chi2_sex=Chi2Result(**raw["chi2_sex"]),
        chi2_age=Chi2Result(**raw["chi2_age"]),
        counts=(counts["t"], counts["r"], counts["t_and_r"], counts["r_not_t"]),
    )


@dataclass
class FrameworkRanking:
    """Per-measure ranks (1 = best, ties averaged) and the winner."""

    labels: tuple[str, ...]
    values: dict[str, dict[str, float]]  # label -> measure -> value
    ranks: dict[str, dict[str, float]]  # label -> measure -> rank
    average_ranks: dict[str, float]
    winner: str

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": self.values,
            "ranks": self.ranks,
            "average_ranks": self.average_ranks,
            "winner": self.winner,
        }


def _ranks_with_ties(values: Sequence[float], higher_is_better: bool) -> list[float]:
    n = len(values)
    keyed = sorted(range(n), key=lambda i: -values[i] if higher_is_better else values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[keyed[j + 1]] == values[keyed[i]]:
            j += 1
        shared = (i + j) / 2 + 1  # average of tied 1-based positions
        for k in range(i, j + 1):
            ranks[keyed[k]] = shared
        i = j + 1
    return ranks


def rank_frameworks(reports: Sequence[tuple[str, QualityReport]]) -> FrameworkRanking:
    """Rank candidate censuses on the four measures; the lowest average
    rank wins. Ties within a measure share the average of the positions
    they straddle."""
    if len(reports) < 2:
        raise DataError("ranking needs at least two candidates")
    labels = tuple(label for label, _ in reports)
    values: dict[str, dict[str, float]] = {label: {} for label in labels}
    ranks: dict[str, dict[str, float]] = {label: {} for label in labels}
    for measure, higher_is_better in RANKED_MEASURES:
        column = [getattr(report, measure) for _, report in reports]
        measure_ranks = _ranks_with_ties(column, higher_is_better)
        for label, value, rank in zip(labels, column, measure_ranks):
            values[label][measure] = value
            ranks[label][measure] = rank
    average = {
        label: sum(ranks[label].values()) / len(RANKED_MEASURES) for label in labels
    }
    winner = min(labels, key=lambda label: (average[label], labels.index(label)))
    return FrameworkRanking(labels=labels, values=values, ranks=ranks, average_ranks=average, winner=winner)
