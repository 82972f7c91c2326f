import pytest

from regcensus.errors import ConfigError, DataError
from regcensus.frameworks import (
    CensusPopulation,
    FrameworkSpec,
    enumerate_population,
    pyramid,
)
from regcensus.records import NA, AGE_BIN_LABELS

import paper_counts
from conftest import make_record, make_register, run_pipeline
from oracles import oracle_integrate, oracle_members, oracle_tallies, row_dict


def _person(rid, year, pid, *, sex="M", yob="1980", area="A1", missing=()):
    values = {
        "pid": pid,
        "prefix": "Mr." if sex == "M" else "Mrs.",
        "first_name": "Som",
        "last_name": "Jai",
        "year_of_birth": yob,
        "sex": sex,
        "address_area": area,
    }
    for name in missing:
        values[name] = NA
    return make_record(register_id=rid, ts=year * 100, **values)


def _db(records_by_year, fallback=True, census_year=None):
    registers = [
        make_register(register_id=f"bmn{year}", year=year, records=records)
        for year, records in records_by_year.items()
    ]
    db, _ = run_pipeline(registers, fallback=fallback, census_year=census_year)
    return db


AREAS = frozenset({"A1", "A2"})


class TestMembershipRules:
    def test_complete_rows_make_f1_to_f4_identical(self):
        records = [_person("bmn2019", 2019, str(i)) for i in range(5)]
        db = _db({2019: records})
        sizes = {}
        members = {}
        for kind in ("F1", "F2", "F3", "F4"):
            pop = enumerate_population(db, FrameworkSpec(kind=kind, census_area_codes=AREAS))
            sizes[kind] = pop.size
            members[kind] = pop.members
        assert sizes == {"F1": 5, "F2": 5, "F3": 5, "F4": 5}
        assert members["F1"] == members["F2"] == members["F3"] == members["F4"]

    def test_missing_sex_in_f2_and_f4_not_f3(self):
        records = [_person("bmn2019", 2019, "1", missing=("sex",))]
        db = _db({2019: records})
        in_f = {
            kind: enumerate_population(db, FrameworkSpec(kind=kind, census_area_codes=AREAS)).size
            for kind in ("F2", "F3", "F4")
        }
        assert in_f == {"F2": 1, "F3": 0, "F4": 1}

    def test_f1_requires_area_codes(self):
        db = _db({2019: [_person("bmn2019", 2019, "1")]})
        with pytest.raises(ConfigError):
            enumerate_population(db, FrameworkSpec(kind="F1"))

    def test_f1_excludes_out_of_area(self):
        records = [
            _person("bmn2019", 2019, "1", area="A1"),
            _person("bmn2019", 2019, "2", area="Z9"),
            _person("bmn2019", 2019, "3", missing=("address_area",)),
        ]
        db = _db({2019: records})
        pop = enumerate_population(db, FrameworkSpec(kind="F1", census_area_codes=AREAS))
        assert pop.size == 1

    def test_f5_counts_multi_register_members(self):
        shared = [_person(f"bmn{y}", y, "1") for y in (2017, 2018, 2019)]
        single = _person("bmn2019", 2019, "2")
        db = _db({2017: [shared[0]], 2018: [shared[1]], 2019: [shared[2], single]})
        f5 = enumerate_population(db, FrameworkSpec(kind="F5", census_area_codes=AREAS))
        f2 = enumerate_population(db, FrameworkSpec(kind="F2", census_area_codes=AREAS))
        assert f5.size == 1
        assert f2.size == 2

    def test_f5_on_single_register_database_is_config_error(self):
        db = _db({2019: [_person("bmn2019", 2019, "1")]})
        with pytest.raises(ConfigError, match="at least 2 registers"):
            enumerate_population(db, FrameworkSpec(kind="F5", census_area_codes=AREAS))

    def test_f5_monotone_in_min_registers(self):
        records_by_year = {
            year: [_person(f"bmn{year}", year, str(p)) for p in range(person_count)]
            for year, person_count in ((2017, 6), (2018, 4), (2019, 2))
        }
        db = _db(records_by_year)
        sizes = [
            enumerate_population(
                db, FrameworkSpec(kind="F5", census_area_codes=AREAS, min_registers=m)
            ).size
            for m in (2, 3)
        ]
        assert sizes[0] >= sizes[1]

    def test_f2_strict_flag(self):
        db = _db({2017: [_person("bmn2017", 2017, "1")], 2019: [_person("bmn2019", 2019, "1"), _person("bmn2019", 2019, "2")]})
        loose = enumerate_population(db, FrameworkSpec(kind="F2", census_area_codes=AREAS))
        strict = enumerate_population(
            db, FrameworkSpec(kind="F2", census_area_codes=AREAS, pid_on_all_registers=True)
        )
        assert loose.size == 2
        assert strict.size == 1

    def test_monotonicity_f3_f2_f4(self):
        records = [
            _person("bmn2019", 2019, "1"),
            _person("bmn2019", 2019, "2", missing=("sex",)),
            _person("bmn2019", 2019, "3", missing=("prefix", "year_of_birth")),
            _person("bmn2019", 2019, NA),  # combined-key row
        ]
        db = _db({2019: records})
        pops = {
            kind: enumerate_population(db, FrameworkSpec(kind=kind, census_area_codes=AREAS)).members
            for kind in ("F2", "F3", "F4")
        }
        assert pops["F3"] <= pops["F2"] <= pops["F4"]

    def test_empty_database_is_data_error(self):
        from regcensus.records import IntegratedDatabase

        empty = IntegratedDatabase(rows={}, source_count={}, provenance={}, census_year=2019, register_ids=frozenset({"a"}))
        with pytest.raises(DataError):
            enumerate_population(empty, FrameworkSpec(kind="F4"))

    def test_unknown_buckets_conserve_population(self):
        records = [
            _person("bmn2019", 2019, "1", missing=("sex", "year_of_birth")),
            _person("bmn2019", 2019, "2"),
        ]
        db = _db({2019: records})
        pop = enumerate_population(db, FrameworkSpec(kind="F2", census_area_codes=AREAS))
        assert pop.size == 2
        assert sum(pop.by_sex.values()) == 2
        assert sum(pop.by_age.values()) == 2
        assert pop.by_sex["unknown"] == 1
        assert pop.by_age["unknown"] == 1

    def test_membership_matches_brute_force_oracle(self):
        records_by_year = {}
        for year in (2017, 2018, 2019):
            rid = f"bmn{year}"
            records = []
            for i in range(12):
                missing = []
                if i % 4 == 0:
                    missing.append("sex")
                if i % 5 == 0:
                    missing.append("pid")
                records.append(
                    _person(
                        rid,
                        year,
                        str(100 + i),
                        sex="M" if i % 2 else "F",
                        yob=str(1940 + 3 * i),
                        area="A1" if i % 3 else "Z9",
                        missing=missing,
                    )
                )
            records_by_year[year] = records
        registers = [
            make_register(register_id=f"bmn{year}", year=year, records=records)
            for year, records in records_by_year.items()
        ]
        db, _ = run_pipeline(registers)
        merged_rows, _ = oracle_integrate(
            [[row_dict(r) for r in reg.records] for reg in registers]
        )
        for kind in ("F1", "F2", "F3", "F4", "F5"):
            pop = enumerate_population(db, FrameworkSpec(kind=kind, census_area_codes=AREAS))
            expected = oracle_members(merged_rows, kind, AREAS)
            assert pop.size == len(expected), kind
            by_sex, by_age = oracle_tallies(expected, db.census_year)
            assert dict(pop.by_sex) == by_sex, kind
            assert dict(pop.by_age) == by_age, kind


class TestPyramid:
    def test_empty_population_gives_zero_table(self):
        pop = CensusPopulation.from_counts("F2", 2019, 0)
        table = pyramid(pop)
        # from_counts with no marginals parks everything in unknown; size 0 means all zero
        assert table.total() == 0
        assert set(table.age_totals()) == set(AGE_BIN_LABELS) | {"unknown"}

    def test_generator_counts_are_the_oracle(self):
        records = [
            _person("bmn2019", 2019, "1", sex="F", yob="2019"),
            _person("bmn2019", 2019, "2", sex="M", yob="1990"),
            _person("bmn2019", 2019, "3", sex="M", yob="1940"),
        ]
        db = _db({2019: records})
        pop = enumerate_population(db, FrameworkSpec(kind="F2", census_area_codes=AREAS))
        table = pyramid(pop)
        assert table.counts[("0-4", "F")] == 1
        assert table.counts[("25-29", "M")] == 1
        assert table.counts[(">=70", "M")] == 1
        assert table.total() == 3

    def test_prebuilt_population_reproduces_published_age_column(self):
        f5 = paper_counts.R5
        pop = CensusPopulation.from_counts(
            "F5",
            2019,
            f5["r_size"],
            by_sex=f5["sex"],
            by_age=f5["age"],
            source_years="2017-2019",
        )
        table = pyramid(pop)
        totals = table.age_totals()
        for label, expected in f5["age"].items():
            assert totals[label] == expected
        assert table.total() == f5["r_size"]

    def test_csv_shape(self, tmp_path):
        pop = CensusPopulation.from_counts("F2", 2019, 10, by_age={"0-4": 10})
        path = tmp_path / "pyramid.csv"
        pyramid(pop).write_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "age_bin,F,M,unknown"
        assert len(lines) == 1 + 15 + 1  # header, 15 bins, unknown
