"""Census population enumeration under the five conceptual frameworks.

F1 counts people with an identifiable current address inside the census
area, F2 those joined through a citizen id, F3 those with every main
census variable present, F4 those with at least one, and F5 those seen
in a minimum number of registers. When census area codes are configured
every framework is additionally restricted to rows whose address falls
inside them, mirroring a study scoped to the surveyed areas.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigError, DataError
from .records import (
    AGE_BIN_LABELS,
    MAIN_VARIABLES,
    ORIGIN_CITIZEN_ID,
    GlobalKey,
    IntegratedDatabase,
    RegisterRecord,
    bin_age,
    is_present,
)

FRAMEWORK_KINDS = ("F1", "F2", "F3", "F4", "F5")

UNKNOWN = "unknown"

SEX_COLUMNS = ("F", "M", UNKNOWN)


@dataclass(frozen=True)
class FrameworkSpec:
    kind: str
    census_area_codes: frozenset[str] = frozenset()
    main_variables: tuple[str, ...] = MAIN_VARIABLES
    min_registers: int = 2
    pid_on_all_registers: bool = False  # stricter F2: a pid seen in every register

    def __post_init__(self) -> None:
        object.__setattr__(self, "census_area_codes", frozenset(self.census_area_codes))
        object.__setattr__(self, "main_variables", tuple(self.main_variables))
        if self.kind not in FRAMEWORK_KINDS:
            raise ConfigError(f"unknown framework {self.kind!r}")
        if not self.main_variables:
            raise ConfigError("main_variables must not be empty")
        if self.kind == "F5" and self.min_registers < 2:
            raise ConfigError("F5 needs min_registers >= 2")


@dataclass(frozen=True)
class CensusPopulation:
    """One framework's enumeration result.

    Members lacking sex or age land in explicit unknown buckets so the
    marginals always add back up to the population size. Count-only
    populations (rebuilt from published tables) carry no member sets.
    """

    size: int
    framework: str
    census_year: int
    source_years: str
    by_sex: Mapping[str, int]
    by_age: Mapping[str, int]
    by_age_sex: Mapping[tuple[str, str], int]
    members: frozenset[GlobalKey] | None = None
    member_pids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.members is not None:
            if len(self.members) != self.size:
                raise DataError("population size does not match its member set")
            if sum(self.by_sex.values()) != self.size or sum(self.by_age.values()) != self.size:
                raise DataError("population marginals do not sum to the population size")

    @classmethod
    def from_counts(
        cls,
        framework: str,
        census_year: int,
        size: int,
        by_sex: Mapping[str, int] | None = None,
        by_age: Mapping[str, int] | None = None,
        source_years: str = "",
    ) -> "CensusPopulation":
        """Build a count-only population, e.g. from a published table."""
        by_age = dict(by_age or {})
        by_sex = dict(by_sex or {})
        if by_age:
            joint = {(label, UNKNOWN): count for label, count in by_age.items()}
        else:
            joint = {(UNKNOWN, UNKNOWN): size}
        return cls(
            size=size,
            framework=framework,
            census_year=census_year,
            source_years=source_years,
            by_sex=by_sex,
            by_age=by_age,
            by_age_sex=joint,
        )

    def members_digest(self) -> str:
        keys = sorted(k.value for k in self.members) if self.members else []
        return hashlib.sha256("\n".join(keys).encode("utf-8")).hexdigest()

    def as_dict(self) -> dict:
        return {
            "framework": self.framework,
            "census_year": self.census_year,
            "source_years": self.source_years,
            "count": self.size,
            "members_digest": self.members_digest(),
            "by_sex": dict(self.by_sex),
            "by_age": dict(self.by_age),
        }


def _age_label(record: RegisterRecord, census_year: int) -> str:
    value = record.year_of_birth
    if not is_present(value):
        return UNKNOWN
    try:
        year = int(value)
    except ValueError:
        return UNKNOWN
    if year > census_year:
        return UNKNOWN
    return bin_age(year, census_year).label


def enumerate_population(db: IntegratedDatabase, spec: FrameworkSpec) -> CensusPopulation:
    """Apply one framework's membership rule to every integrated row."""
    if not db.rows:
        raise DataError("cannot enumerate an empty integrated database")
    if spec.kind == "F1" and not spec.census_area_codes:
        raise ConfigError("F1 needs census area codes")
    if spec.kind == "F5" and len(db.register_ids) < 2:
        raise ConfigError(
            f"F5 requires at least 2 registers; this database was built from {len(db.register_ids)}"
        )

    members: set[GlobalKey] = set()
    member_pids: set[str] = set()
    by_sex: dict[str, int] = {}
    by_age: dict[str, int] = {}
    joint: dict[tuple[str, str], int] = {}

    scope = spec.census_area_codes
    for key, row in db.rows.items():
        if scope and not (is_present(row.address_area) and row.address_area in scope):
            continue
        if not _is_member(key, row, db, spec):
            continue
        members.add(key)
        if is_present(row.pid):
            member_pids.add(row.pid)
        sex = row.sex if is_present(row.sex) and row.sex in ("F", "M") else UNKNOWN
        age = _age_label(row, db.census_year)
        by_sex[sex] = by_sex.get(sex, 0) + 1
        by_age[age] = by_age.get(age, 0) + 1
        joint[(age, sex)] = joint.get((age, sex), 0) + 1

    years = sorted(db.register_ids)
    return CensusPopulation(
        size=len(members),
        framework=spec.kind,
        census_year=db.census_year,
        source_years=",".join(years),
        by_sex=by_sex,
        by_age=by_age,
        by_age_sex=joint,
        members=frozenset(members),
        member_pids=frozenset(member_pids),
    )


def _is_member(key: GlobalKey, row: RegisterRecord, db: IntegratedDatabase, spec: FrameworkSpec) -> bool:
    if spec.kind == "F1":
        return is_present(row.address_area) and row.address_area in spec.census_area_codes
    if spec.kind == "F2":
        if not is_present(row.pid):
            return False
        if spec.pid_on_all_registers:
            return db.source_count[key] == len(db.register_ids)
        return True
    if spec.kind == "F3":
        return all(is_present(row.get(name)) for name in spec.main_variables)
    if spec.kind == "F4":
        return any(is_present(row.get(name)) for name in spec.main_variables)
    return db.source_count[key] >= spec.min_registers  # F5


@dataclass
class PyramidTable:
    """Joint (age bin, sex) counts: 15 bins plus an unknown row, sex
    columns F, M, unknown."""

    counts: dict[tuple[str, str], int]

    @property
    def row_labels(self) -> tuple[str, ...]:
        return AGE_BIN_LABELS + (UNKNOWN,)

    def total(self) -> int:
        return sum(self.counts.values())

    def age_totals(self) -> dict[str, int]:
        return {
            label: sum(self.counts[(label, sex)] for sex in SEX_COLUMNS)
            for label in self.row_labels
        }

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["age_bin", *SEX_COLUMNS])
            for label in self.row_labels:
                writer.writerow([label, *[self.counts[(label, sex)] for sex in SEX_COLUMNS]])


def pyramid(population: CensusPopulation) -> PyramidTable:
    """Tabulate the population's joint age and sex counts."""
    counts = {
        (label, sex): 0
        for label in AGE_BIN_LABELS + (UNKNOWN,)
        for sex in SEX_COLUMNS
    }
    for (age, sex), count in population.by_age_sex.items():
        counts[(age, sex)] += count
    return PyramidTable(counts)


def write_population_json(population: CensusPopulation, path: Path | str) -> None:
    Path(path).write_text(
        json.dumps(population.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
