"""Joins cleansed, de-identified registers into one database.

The join runs in three steps: records with a pid group by pid, the
leftovers group by the combined name/birth/sex/address key when every
component is present, and anything that fits neither key is dropped and
counted. Each group then collapses to one row, field by field, with the
replacement policy deciding which value survives a conflict.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .errors import ConfigError
from .records import (
    CANONICAL_FIELDS,
    MAIN_VARIABLES,
    NA,
    ORIGIN_CITIZEN_ID,
    ORIGIN_COMBINED_KEY,
    FieldValue,
    GlobalKey,
    IntegratedDatabase,
    Register,
    RegisterRecord,
    encode_value,
    decode_value,
    is_present,
)

COMBINED_KEY_FIELDS = ("first_name", "last_name", "year_of_birth", "sex", "address_area")

STRATEGY_TIMELINE = "timeline"
STRATEGY_SOURCE_PRIORITY = "source_priority"


@dataclass(frozen=True)
class KeySpec:
    """Joining conditions: pid first, combined key as the fallback."""

    fallback_enabled: bool = True
    combined_fields: tuple[str, ...] = COMBINED_KEY_FIELDS


@dataclass(frozen=True)
class ReplacementPolicy:
    """Which value survives when a person's records conflict.

    timeline: newest record wins, priority list breaks ties.
    source_priority: the listed register order wins outright.
    """

    strategy: str = STRATEGY_TIMELINE
    source_priority: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_priority", tuple(self.source_priority))
        if self.strategy not in (STRATEGY_TIMELINE, STRATEGY_SOURCE_PRIORITY):
            raise ConfigError(f"unknown replacement strategy {self.strategy!r}")


@dataclass
class RegisterScorecard:
    """Informational per-register quality summary; never used to pick values."""

    register_id: str
    records: int
    completeness: float  # mean share of the six main variables present
    recency: int  # newest record timestamp
    pid_present_rate: float
    usable_fields: int  # canonical fields with at least one present value

    def as_dict(self) -> dict:
        return {
            "register_id": self.register_id,
            "records": self.records,
            "completeness": self.completeness,
            "recency": self.recency,
            "pid_present_rate": self.pid_present_rate,
            "usable_fields": self.usable_fields,
        }


@dataclass
class IntegrationLog:
    input_records: int
    merged_by_pid: int
    merged_by_combined_key: int
    dropped: int
    groups: int
    census_year: int
    register_ids: tuple[str, ...]
    per_register_scorecard: list[RegisterScorecard] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "input_records": self.input_records,
            "merged_by_pid": self.merged_by_pid,
            "merged_by_combined_key": self.merged_by_combined_key,
            "dropped": self.dropped,
            "groups": self.groups,
            "census_year": self.census_year,
            "register_ids": list(self.register_ids),
            "per_register_scorecard": [s.as_dict() for s in self.per_register_scorecard],
        }


@dataclass
class RegisterKeyStats:
    register_id: str
    total: int
    present: int
    distinct: int

    @property
    def present_rate(self) -> float:
        return self.present / self.total if self.total else 0.0

    @property
    def uniqueness_rate(self) -> float:
        return self.distinct / self.present if self.present else 1.0


@dataclass
class PrimaryKeyAudit:
    """Machine checks of the primary-key properties, plus hooks for the
    ones only an external authority can answer."""

    field_name: str
    per_register: dict[str, RegisterKeyStats]
    cross_register_presence: float  # distinct values seen in every register / distinct overall
    reuse_suspects: int  # same value, conflicting identity fields across registers
    machine_checks: dict[str, bool]
    external_checks: dict[str, object]
    fallback_required: bool  # some records lack the key and must be removed or routed to the fallback key


def relabel_fields(register: Register) -> Register:
    """Apply the dictionary's renames so every register speaks the same
    field names ('gender' becomes 'sex', and so on). The renames are
    consumed: the returned register's dictionary has none left."""
    renames = {s: t for s, t in register.dictionary.renames.items() if s != t}
    if not renames:
        return register
    out = []
    for record in register.records:
        for source, target in sorted(renames.items()):
            value = record.get(source)
            if not is_present(value):
                continue
            if is_present(record.get(target)):
                raise ConfigError(
                    f"rename {source!r} -> {target!r} would overwrite a present value"
                )
            record = record.with_field(source, NA)
            record = record.with_field(target, value)
        extra = {n: v for n, v in record.extra.items() if n not in renames}
        record = replace(record, extra=extra)
        out.append(record)
    dictionary = replace(register.dictionary, renames={})
    return replace(register, records=tuple(out), dictionary=dictionary)


def validate_key_candidate(
    registers: Sequence[Register],
    field_name: str,
    checksum_validator: Callable[[str], bool] | None = None,
    reference_lookup: Callable[[str], bool] | None = None,
) -> PrimaryKeyAudit:
    """Audit a field against the primary-key properties.

    Uniqueness, presence, and non-reuse are checked from the data;
    checksum and reference-register validation need outside knowledge, so
    they run only when a hook is supplied and otherwise report as
    externally checkable.
    """
    for register in registers:
        known = set(CANONICAL_FIELDS) | set(register.extra_field_names())
        if field_name not in known:
            raise ConfigError(
                f"field {field_name!r} does not exist in register {register.register_id!r}"
            )
    per_register: dict[str, RegisterKeyStats] = {}
    values_by_register: dict[str, set[str]] = {}
    identity_by_value: dict[str, set[tuple]] = {}
    for register in registers:
        present = [r.get(field_name) for r in register.records if is_present(r.get(field_name))]
        stats = RegisterKeyStats(
            register_id=register.register_id,
            total=len(register.records),
            present=len(present),
            distinct=len(set(present)),
        )
        per_register[register.register_id] = stats
        values_by_register[register.register_id] = set(present)
        for record in register.records:
            value = record.get(field_name)
            if is_present(value):
                identity = tuple(record.get(n) for n in ("first_name", "last_name", "year_of_birth"))
                identity_by_value.setdefault(value, set()).add(identity)

    all_values: set[str] = set().union(*values_by_register.values()) if values_by_register else set()
    everywhere = [v for v in all_values if all(v in vals for vals in values_by_register.values())]
    cross_presence = len(everywhere) / len(all_values) if all_values else 0.0
    reuse_suspects = sum(1 for identities in identity_by_value.values() if len(identities) > 1)

    machine_checks = {
        "uniqueness": all(s.distinct == s.present for s in per_register.values()),
        "presence_everywhere": all(s.present == s.total for s in per_register.values()),
        "non_reuse": reuse_suspects == 0,
    }
    external_checks: dict[str, object] = {}
    for name, hook in (("checksum_digit", checksum_validator), ("reference_register", reference_lookup)):
        if hook is None:
            external_checks[name] = "externally checkable"
        else:
            external_checks[name] = all(hook(v) for v in sorted(all_values))

    return PrimaryKeyAudit(
        field_name=field_name,
        per_register=per_register,
        cross_register_presence=cross_presence,
        reuse_suspects=reuse_suspects,
        machine_checks=machine_checks,
        external_checks=external_checks,
        fallback_required=any(s.present < s.total for s in per_register.values()),
    )


def integrate(
    registers: Sequence[Register],
    keys: KeySpec | None = None,
    policy: ReplacementPolicy | None = None,
    census_year: int | None = None,
) -> tuple[IntegratedDatabase, IntegrationLog]:
    """Run the three-step global-key join over relabeled, cleansed,
    de-identified registers.

    The output is independent of the order the registers are passed in:
    group keys are assigned in sorted order and every tie in value
    selection breaks on timestamp, then configured priority, then
    register id, then the value itself.
    """
    if not registers:
        raise ConfigError("integrate needs at least one register")
    ids = [r.register_id for r in registers]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate register ids in integration input")
    keys = keys or KeySpec()
    policy = policy or ReplacementPolicy()
    if policy.strategy == STRATEGY_SOURCE_PRIORITY or policy.source_priority:
        if sorted(policy.source_priority) != sorted(ids):
            raise ConfigError("source priority list must name every register exactly once")

    by_pid: dict[str, list[RegisterRecord]] = {}
    by_combined: dict[tuple, list[RegisterRecord]] = {}
    dropped = 0
    total = 0
    for register in sorted(registers, key=lambda r: r.register_id):
        for record in register.records:
            total += 1
            if is_present(record.pid):
                by_pid.setdefault(record.pid, []).append(record)
            elif keys.fallback_enabled and all(
                is_present(record.get(name)) for name in keys.combined_fields
            ):
                combined = tuple(record.get(name) for name in keys.combined_fields)
                by_combined.setdefault(combined, []).append(record)
            else:
                dropped += 1

    priority_index = {rid: i for i, rid in enumerate(policy.source_priority)}
    rows: dict[GlobalKey, RegisterRecord] = {}
    source_count: dict[GlobalKey, int] = {}
    provenance: dict[tuple[GlobalKey, str], str] = {}

    def merge_groups(groups: dict, origin: str, prefix: str) -> int:
        merged_records = 0
        for counter, group_key in enumerate(sorted(groups), start=1):
            members = groups[group_key]
            key = GlobalKey(f"{prefix}-{counter:06d}", origin)
            merged, winners = _merge_group(members, policy, priority_index)
            rows[key] = merged
            source_count[key] = len({m.register_id for m in members})
            for field_name, register_id in winners.items():
                provenance[(key, field_name)] = register_id
            merged_records += len(members)
        return merged_records

    merged_by_pid = merge_groups(by_pid, ORIGIN_CITIZEN_ID, "C")
    merged_by_combined = merge_groups(by_combined, ORIGIN_COMBINED_KEY, "K")

    year = census_year if census_year is not None else max(r.reference_year for r in registers)
    log = IntegrationLog(
        input_records=total,
        merged_by_pid=merged_by_pid,
        merged_by_combined_key=merged_by_combined,
        dropped=dropped,
        groups=len(rows),
        census_year=year,
        register_ids=tuple(sorted(ids)),
        per_register_scorecard=[_scorecard(r) for r in sorted(registers, key=lambda r: r.register_id)],
    )
    database = IntegratedDatabase(
        rows=rows,
        source_count=source_count,
        provenance=provenance,
        census_year=year,
        register_ids=frozenset(ids),
    )
    return database, log


def _selection_order(policy: ReplacementPolicy, priority_index: dict[str, int]):
    fallback = len(priority_index)

    def timeline_key(record: RegisterRecord):
        return (
            -record.record_timestamp,
            priority_index.get(record.register_id, fallback),
            record.register_id,
        )

    def priority_key(record: RegisterRecord):
        return (
            priority_index.get(record.register_id, fallback),
            -record.record_timestamp,
            record.register_id,
        )

    return timeline_key if policy.strategy == STRATEGY_TIMELINE else priority_key


def _merge_group(
    members: Sequence[RegisterRecord],
    policy: ReplacementPolicy,
    priority_index: dict[str, int],
) -> tuple[RegisterRecord, dict[str, str]]:
    order = _selection_order(policy, priority_index)
    field_names = list(CANONICAL_FIELDS)
    field_names.extend(sorted({name for m in members for name in m.extra}))

    values: dict[str, FieldValue] = {}
    winners: dict[str, str] = {}
    for name in field_names:
        candidates = [m for m in members if is_present(m.get(name))]
        if not candidates:
            continue
        best = min(candidates, key=lambda m: (*order(m), m.get(name)))
        values[name] = best.get(name)
        winners[name] = best.register_id

    merged = RegisterRecord(
        register_id="+".join(sorted({m.register_id for m in members})),
        record_timestamp=max(m.record_timestamp for m in members),
        extra={n: v for n, v in values.items() if n not in CANONICAL_FIELDS},
        **{n: values.get(n, NA) for n in CANONICAL_FIELDS},
    )
    return merged, winners


def _scorecard(register: Register) -> RegisterScorecard:
    records = register.records
    if records:
        completeness = sum(
            sum(1 for v in r.main_values() if is_present(v)) / len(MAIN_VARIABLES) for r in records
        ) / len(records)
        pid_rate = sum(1 for r in records if is_present(r.pid)) / len(records)
        recency = max(r.record_timestamp for r in records)
    else:
        completeness, pid_rate, recency = 0.0, 0.0, 0
    usable = sum(
        1 for name in CANONICAL_FIELDS if any(is_present(r.get(name)) for r in records)
    )
    return RegisterScorecard(
        register_id=register.register_id,
        records=len(records),
        completeness=completeness,
        recency=recency,
        pid_present_rate=pid_rate,
        usable_fields=usable,
    )


def write_database(database: IntegratedDatabase, log: IntegrationLog, out_dir: Path) -> None:
    """Persist the integrated table, provenance, and log under out_dir."""
    extras = sorted({name for row in database.rows.values() for name in row.extra})
    with open(out_dir / "integrated.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["global_key", "origin", "source_count", *CANONICAL_FIELDS, "register_id", "record_timestamp", *extras]
        )
        for key in sorted(database.rows):
            row = database.rows[key]
            writer.writerow(
                [
                    key.value,
                    key.origin,
                    database.source_count[key],
                    *[encode_value(row.get(n)) for n in CANONICAL_FIELDS],
                    row.register_id,
                    row.record_timestamp,
                    *[encode_value(row.extra.get(n, NA)) for n in extras],
                ]
            )
    with open(out_dir / "provenance.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["global_key", "field", "register_id"])
        for (key, field_name), register_id in sorted(
            database.provenance.items(), key=lambda item: (item[0][0], item[0][1])
        ):
            writer.writerow([key.value, field_name, register_id])
    (out_dir / "integration_log.json").write_text(
        json.dumps(log.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_database(out_dir: Path) -> tuple[IntegratedDatabase, IntegrationLog]:
    """Load what write_database persisted."""
    raw_log = json.loads((out_dir / "integration_log.json").read_text(encoding="utf-8"))
    log = IntegrationLog(
        input_records=raw_log["input_records"],
        merged_by_pid=raw_log["merged_by_pid"],
        merged_by_combined_key=raw_log["merged_by_combined_key"],
        dropped=raw_log["dropped"],
        groups=raw_log["groups"],
        census_year=raw_log["census_year"],
        register_ids=tuple(raw_log["register_ids"]),
        per_register_scorecard=[
            RegisterScorecard(**entry) for entry in raw_log["per_register_scorecard"]
        ],
    )
    rows: dict[GlobalKey, RegisterRecord] = {}
    source_count: dict[GlobalKey, int] = {}
    with open(out_dir / "integrated.csv", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        extras = header[header.index("record_timestamp") + 1 :]
        for cells in reader:
            row = dict(zip(header, cells))
            key = GlobalKey(row["global_key"], row["origin"])
            extra = {
                name: decode_value(row[name])
                for name in extras
                if isinstance(decode_value(row[name]), str)
            }
            rows[key] = RegisterRecord(
                register_id=row["register_id"],
                record_timestamp=int(row["record_timestamp"]),
                extra=extra,
                **{name: decode_value(row[name]) for name in CANONICAL_FIELDS},
            )
            source_count[key] = int(row["source_count"])
    provenance: dict[tuple[GlobalKey, str], str] = {}
    with open(out_dir / "provenance.csv", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        key_by_value = {k.value: k for k in rows}
        for value, field_name, register_id in reader:
            provenance[(key_by_value[value], field_name)] = register_id
    database = IntegratedDatabase(
        rows=rows,
        source_count=source_count,
        provenance=provenance,
        census_year=log.census_year,
        register_ids=frozenset(log.register_ids),
    )
    return database, log
