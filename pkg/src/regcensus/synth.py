"""Synthetic multi-year registers with known ground truth.

Generates a person population, one register per reference year, and a
reference census sampled from the people truly inside the census area at
the census date. Migration removes people from later registers while
their older records keep the stale in-area address, which is the classic
source of overcoverage when years are pooled. All draws come from one
seeded Mersenne Twister stream, so a scenario replays exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import random

from .errors import ConfigError
from .records import (
    NA,
    FieldDictionary,
    ReferenceCensus,
    Register,
    RegisterRecord,
    bin_age,
    write_register_csv,
)

GENERATOR_ID = "python-random-mt19937"

FIRST_NAMES = (
    "Somchai", "Somsak", "Sompong", "Somying", "Sunisa", "Kanya", "Anong", "Arthit",
    "Chai", "Dara", "Kamon", "Kiet", "Lamai", "Mali", "Narong", "Nin",
    "Pim", "Prasert", "Ratana", "Sak", "Siriporn", "Suda", "Thaksin", "Ubon",
    "Wichai", "Yai", "Boon", "Chalerm", "Duang", "Kraisee", "Lek", "Mongkut",
)

LAST_NAMES = (
    "Jaidee", "Srisuk", "Boonmee", "Chaiyasit", "Thongdee", "Rattanakorn", "Saetang", "Wongsa",
    "Phumsiri", "Kittikhun", "Laohapan", "Mahasak", "Nakornthap", "Ongart", "Pattama", "Raksa",
    "Saengthong", "Tanasarn", "Udomsak", "Vorapan", "Wattana", "Yodrak", "Anuwat", "Bunnag",
    "Chaovalit", "Duangjai", "Intarat", "Kamnan", "Lertsiri", "Muangthai", "Nopparat", "Srisai",
)


@dataclass(frozen=True)
class ScenarioConfig:
    population_size: int
    years: tuple[int, ...]
    area_codes: tuple[str, ...]
    census_area_codes: frozenset[str]
    migration_rate_per_year: float = 0.0
    missingness: Mapping[str, float] = field(default_factory=dict)
    duplication_rate: float = 0.0
    reference_census_sampling: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "years", tuple(sorted(self.years)))
        object.__setattr__(self, "area_codes", tuple(self.area_codes))
        object.__setattr__(self, "census_area_codes", frozenset(self.census_area_codes))
        if self.population_size < 1:
            raise ConfigError("population_size must be >= 1")
        if not self.years:
            raise ConfigError("at least one reference year is required")
        if not self.census_area_codes <= set(self.area_codes):
            raise ConfigError("census_area_codes must be a subset of area_codes")
        rates = [self.migration_rate_per_year, self.duplication_rate, self.reference_census_sampling]
        rates.extend(self.missingness.values())
        if any(not 0.0 <= rate <= 1.0 for rate in rates):
            raise ConfigError("all rates must lie in [0, 1]")

    @property
    def census_year(self) -> int:
        return self.years[-1]

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ScenarioConfig":
        return cls(
            population_size=int(raw["population_size"]),
            years=tuple(int(y) for y in raw["years"]),
            area_codes=tuple(raw["area_codes"]),
            census_area_codes=frozenset(raw["census_area_codes"]),
            migration_rate_per_year=float(raw.get("migration_rate_per_year", 0.0)),
            missingness={k: float(v) for k, v in raw.get("missingness", {}).items()},
            duplication_rate=float(raw.get("duplication_rate", 0.0)),
            reference_census_sampling=float(raw.get("reference_census_sampling", 1.0)),
            seed=int(raw.get("seed", 0)),
        )


@dataclass
class GroundTruth:
    """Exact membership sets, in raw (pre-hash) id space."""

    in_area_pids: frozenset[str]  # truly inside the census area at the census date
    reference_pids: frozenset[str]  # the subset enumerated by the reference census
    per_year_pids: dict[int, frozenset[str]]
    migrated_pids: frozenset[str]

    def as_dict(self) -> dict:
        return {
            "in_area_pids": sorted(self.in_area_pids),
            "reference_pids": sorted(self.reference_pids),
            "per_year_pids": {str(y): sorted(p) for y, p in self.per_year_pids.items()},
            "migrated_pids": sorted(self.migrated_pids),
        }


@dataclass
class _Person:
    pid: str
    prefix: str
    first_name: str
    last_name: str
    year_of_birth: int
    sex: str
    home_area: str
    migrate_year: int | None  # absent from registers of this year onward


def _default_dictionary(census_year: int) -> FieldDictionary:
    return FieldDictionary(
        valid_values={
            "sex": frozenset({"M", "F"}),
            "year_of_birth": (1850, census_year),
        }
    )


def generate(config: ScenarioConfig) -> tuple[list[Register], ReferenceCensus, GroundTruth]:
    """Produce per-year registers, a reference census, and ground truth."""
    rng = random.Random(config.seed)
    census_year = config.census_year

    people: list[_Person] = []
    for index in range(config.population_size):
        sex = rng.choice("MF")
        person = _Person(
            pid=f"1{index:012d}",
            prefix="Mr." if sex == "M" else rng.choice(("Mrs.", "Ms.")),
            first_name=rng.choice(FIRST_NAMES),
            last_name=rng.choice(LAST_NAMES),
            year_of_birth=census_year - rng.randint(0, 90),
            sex=sex,
            home_area=rng.choice(config.area_codes),
            migrate_year=None,
        )
        if person.home_area in config.census_area_codes:
            for year in config.years[1:]:
                if rng.random() < config.migration_rate_per_year:
                    person.migrate_year = year
                    break
        people.append(person)

    registers: list[Register] = []
    per_year_pids: dict[int, frozenset[str]] = {}
    dictionary = _default_dictionary(census_year)
    for year in config.years:
        records: list[RegisterRecord] = []
        present: set[str] = set()
        register_id = f"bmn{year}"
        for person in people:
            if person.migrate_year is not None and year >= person.migrate_year:
                continue
            present.add(person.pid)
            record = _make_record(person, register_id, year, config, rng)
            records.append(record)
            if rng.random() < config.duplication_rate:
                records.append(_bump_timestamp(record))
        registers.append(
            Register(
                register_id=register_id,
                reference_year=year,
                records=tuple(records),
                dictionary=dictionary,
            )
        )
        per_year_pids[year] = frozenset(present)

    in_area = frozenset(
        p.pid
        for p in people
        if p.home_area in config.census_area_codes and p.migrate_year is None
    )
    sampled: set[str] = set()
    sex_counts: dict[str, int] = {"F": 0, "M": 0}
    age_counts: dict[str, int] = {}
    for person in people:
        if person.pid not in in_area:
            continue
        if rng.random() < config.reference_census_sampling:
            sampled.add(person.pid)
            sex_counts[person.sex] += 1
            label = bin_age(person.year_of_birth, census_year).label
            age_counts[label] = age_counts.get(label, 0) + 1
    reference = ReferenceCensus(
        persons=frozenset(sampled),
        sex_counts=sex_counts,
        age_counts=age_counts,
        census_year=census_year,
    )
    truth = GroundTruth(
        in_area_pids=in_area,
        reference_pids=frozenset(sampled),
        per_year_pids=per_year_pids,
        migrated_pids=frozenset(p.pid for p in people if p.migrate_year is not None),
    )
    return registers, reference, truth


def _make_record(
    person: _Person,
    register_id: str,
    year: int,
    config: ScenarioConfig,
    rng: random.Random,
) -> RegisterRecord:
    values = {
        "pid": person.pid,
        "prefix": person.prefix,
        "first_name": person.first_name,
        "last_name": person.last_name,
        "year_of_birth": str(person.year_of_birth),
        "sex": person.sex,
    }
    for name in ("pid", "first_name", "last_name", "year_of_birth", "prefix", "sex"):
        rate = config.missingness.get(name, 0.0)
        if rate and rng.random() < rate:
            values[name] = None
    return RegisterRecord(
        register_id=register_id,
        record_timestamp=year * 100,
        pid=values["pid"] if values["pid"] is not None else NA,
        prefix=values["prefix"] if values["prefix"] is not None else NA,
        first_name=values["first_name"] if values["first_name"] is not None else NA,
        last_name=values["last_name"] if values["last_name"] is not None else NA,
        year_of_birth=values["year_of_birth"] if values["year_of_birth"] is not None else NA,
        sex=values["sex"] if values["sex"] is not None else NA,
        address_area=person.home_area,
    )


def _bump_timestamp(record: RegisterRecord) -> RegisterRecord:
    from dataclasses import replace

    return replace(record, record_timestamp=record.record_timestamp + 1)


def write_scenario(
    config: ScenarioConfig,
    out_dir: Path,
) -> tuple[list[Register], ReferenceCensus, GroundTruth]:
    """Generate and persist a scenario under out_dir.

    Emits one canonical CSV per register, the reference census and ground
    truth as JSON, and a metadata file naming the generator algorithm so
    the scenario can be replayed elsewhere.
    """
    registers, reference, truth = generate(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    for register in registers:
        write_register_csv(register, out_dir / f"{register.register_id}.csv")
    (out_dir / "reference_census.json").write_text(
        json.dumps(
            {
                "census_year": reference.census_year,
                "persons": sorted(reference.persons),
                "sex_counts": dict(reference.sex_counts),
                "age_counts": dict(reference.age_counts),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    (out_dir / "ground_truth.json").write_text(
        json.dumps(truth.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out_dir / "metadata.json").write_text(
        json.dumps(
            {
                "generator": GENERATOR_ID,
                "seed": config.seed,
                "population_size": config.population_size,
                "years": list(config.years),
                "area_codes": list(config.area_codes),
                "census_area_codes": sorted(config.census_area_codes),
                "migration_rate_per_year": config.migration_rate_per_year,
                "missingness": dict(config.missingness),
                "duplication_rate": config.duplication_rate,
                "reference_census_sampling": config.reference_census_sampling,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return registers, reference, truth


def load_reference_census(path: Path | str) -> ReferenceCensus:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return ReferenceCensus(
        persons=frozenset(raw["persons"]),
        sex_counts={k: int(v) for k, v in raw["sex_counts"].items()},
        age_counts={k: int(v) for k, v in raw["age_counts"].items()},
        census_year=int(raw["census_year"]),
    )
