"""Report rendering: machine JSON plus text tables shaped like the
published comparison tables (population/coverage, sex and age
homogeneity with histogram distances, and the final ranking)."""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from .quality import FrameworkRanking, QualityReport, RANKED_MEASURES
from .records import AGE_BIN_LABELS

MEASURE_HEADINGS = {
    "coverage_rate": "Coverage rate",
    "overcoverage_rate": "Overcoverage rate",
    "chd_sex_squared": "CHD(Sex)",
    "chd_age_squared": "CHD(Age)",
}


def format_p_value(p: float) -> str:
    return "< 0.001" if p < 0.001 else f"{p:.3f}"


def render_coverage_table(
    reports: Sequence[tuple[str, QualityReport]],
    sex_counts: Mapping[str, Mapping[str, int]] | None = None,
) -> str:
    not_in_t = "R n T'"
    lines = [
        "Population size, coverage, and overcoverage",
        f"{'Candidate':<42}{'Pop. size':>12}{'T n R':>10}{'Coverage':>10}{not_in_t:>10}{'Overcov.':>10}{'Female':>10}{'Male':>10}",
    ]
    for label, report in reports:
        t_size, r_size, t_and_r, r_not_t = report.counts
        female = male = ""
        if sex_counts and label in sex_counts:
            by_sex = sex_counts[label]
            female = f"{by_sex.get('F', 0):,}"
            male = f"{by_sex.get('M', 0):,}"
        lines.append(
            f"{label:<42}{r_size:>12,}{t_and_r:>10,}{report.coverage_rate:>10.3f}"
            f"{r_not_t:>10,}{report.overcoverage_rate:>10.3f}{female:>10}{male:>10}"
        )
    return "\n".join(lines)


def render_homogeneity_table(reports: Sequence[tuple[str, QualityReport]]) -> str:
    lines = [
        "Chi-square test for homogeneity and chi-square histogram distance",
        f"{'Candidate':<42}{'Chi2(sex)':>12}{'df':>4}{'p':>9}{'CHD(sex)':>13}"
        f"{'Chi2(age)':>12}{'df':>4}{'p':>9}{'CHD(age)':>13}",
    ]
    for label, report in reports:
        lines.append(
            f"{label:<42}{report.chi2_sex.statistic:>12.3f}{report.chi2_sex.df:>4}"
            f"{format_p_value(report.chi2_sex.p_value):>9}{report.chd_sex_squared:>13.5e}"
            f"{report.chi2_age.statistic:>12.2f}{report.chi2_age.df:>4}"
            f"{format_p_value(report.chi2_age.p_value):>9}{report.chd_age_squared:>13.6f}"
        )
    return "\n".join(lines)


def render_ranking_table(ranking: FrameworkRanking) -> str:
    lines = [
        "Measure ranks (1 = best); lowest average rank wins",
        f"{'Candidate':<42}"
        + "".join(f"{MEASURE_HEADINGS[m]:>22}" for m, _ in RANKED_MEASURES)
        + f"{'Avg rank':>10}",
    ]
    for label in ranking.labels:
        cells = []
        for measure, _ in RANKED_MEASURES:
            value = ranking.values[label][measure]
            rank = ranking.ranks[label][measure]
            rank_text = f"{rank:g}"
            if measure.startswith("chd"):
                cells.append(f"{value:.8f} ({rank_text})".rjust(22))
            else:
                cells.append(f"{value:.6f} ({rank_text})".rjust(22))
        lines.append(f"{label:<42}" + "".join(cells) + f"{ranking.average_ranks[label]:>10.2f}")
    lines.append(f"Winner: {ranking.winner}")
    return "\n".join(lines)


def render_tables(
    reports: Sequence[tuple[str, QualityReport]],
    ranking: FrameworkRanking | None,
    sex_counts: Mapping[str, Mapping[str, int]] | None = None,
) -> str:
    sections = [render_coverage_table(reports, sex_counts), render_homogeneity_table(reports)]
    if ranking is not None:
        sections.append(render_ranking_table(ranking))
    return "\n\n".join(sections) + "\n"


def build_report_json(
    reports: Sequence[tuple[str, QualityReport]],
    ranking: FrameworkRanking | None,
) -> str:
    payload = {
        "candidates": [
            {"label": label, **report.as_dict()} for label, report in reports
        ],
        "ranking": ranking.as_dict() if ranking is not None else None,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_counts_fixture(raw: Mapping) -> tuple[int, list[dict]]:
    """Pull (t_census, candidates) out of a published-counts fixture:
    {"census_year", "t_census": {size, sex_counts, age_counts},
     "candidates": [{label, r_size, t_and_r, sex_counts, age_counts}]}."""
    t_census = raw["t_census"]
    candidates = []
    for entry in raw["candidates"]:
        candidates.append(
            {
                "label": entry["label"],
                "t_size": int(t_census["size"]),
                "r_size": int(entry["r_size"]),
                "t_and_r": int(entry["t_and_r"]),
                "sex_r": {k: int(v) for k, v in entry["sex_counts"].items()},
                "sex_t": {k: int(v) for k, v in t_census["sex_counts"].items()},
                "age_r": {k: int(v) for k, v in entry["age_counts"].items()},
                "age_t": {k: int(v) for k, v in t_census["age_counts"].items()},
            }
        )
    return int(raw["census_year"]), candidates


def age_labels() -> tuple[str, ...]:
    return AGE_BIN_LABELS
