"""Shared domain types for the register pipeline.

Every field travels as a FieldValue: either present text or the NA
sentinel. NA is a real marker, not an empty string, and it serializes
to the reserved token ``\\N`` so explicit not-available values survive
CSV round trips.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConfigError, DataError

NA_TOKEN = "\\N"

CONTROL_CHARS = ("\x00", "\n", "\r", "\t")

# The six variables whose presence defines the census membership rules.
MAIN_VARIABLES = ("pid", "first_name", "last_name", "year_of_birth", "prefix", "sex")

# Canonical person fields carried by every record, in serialization order.
CANONICAL_FIELDS = ("pid", "prefix", "first_name", "last_name", "year_of_birth", "sex", "address_area")

FIXED_COLUMNS = CANONICAL_FIELDS + ("register_id", "record_timestamp")

SEX_CODES = ("F", "M")

ORIGIN_CITIZEN_ID = "citizen_id"
ORIGIN_COMBINED_KEY = "combined_key"


class NotAvailable:
    """Singleton sentinel for a value that is explicitly not available."""

    _instance = None

    def __new__(cls) -> "NotAvailable":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NA"

    def __bool__(self) -> bool:
        return False

    def __copy__(self) -> "NotAvailable":
        return self

    def __deepcopy__(self, memo: dict) -> "NotAvailable":
        return self


NA = NotAvailable()

FieldValue = str | NotAvailable


def is_present(value: FieldValue) -> bool:
    return isinstance(value, str)


def field_value(raw: str | None) -> FieldValue:
    """Lift raw source text to a FieldValue; empty or None becomes NA.

    Raises DataError if the text still carries control characters; those
    must be stripped during ingest before records are built.
    """
    if raw is None or raw == "":
        return NA
    _check_text(raw)
    return raw


def _check_text(text: str) -> None:
    for ch in CONTROL_CHARS:
        if ch in text:
            raise DataError(f"control character {ch!r} in field value {text!r}")


def encode_value(value: FieldValue) -> str:
    """Render a FieldValue for canonical CSV. A leading backslash in
    present text is escaped so it cannot collide with the NA token."""
    if not isinstance(value, str):
        return NA_TOKEN
    if value.startswith("\\"):
        return "\\" + value
    return value


def decode_value(text: str) -> FieldValue:
    """Inverse of encode_value. A bare empty cell also reads as NA."""
    if text == NA_TOKEN or text == "":
        return NA
    if text.startswith("\\"):
        return text[1:]
    return text


@dataclass(frozen=True)
class RegisterRecord:
    """One person-row from one register."""

    register_id: str
    record_timestamp: int = 0
    pid: FieldValue = NA
    prefix: FieldValue = NA
    first_name: FieldValue = NA
    last_name: FieldValue = NA
    year_of_birth: FieldValue = NA
    sex: FieldValue = NA
    address_area: FieldValue = NA
    extra: Mapping[str, FieldValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.register_id:
            raise DataError("register_id must be non-empty")
        for name in CANONICAL_FIELDS:
            value = getattr(self, name)
            if isinstance(value, str):
                if value == "":
                    raise DataError(f"present {name} must be non-empty; use NA")
                _check_text(value)
        for name, value in self.extra.items():
            if isinstance(value, str):
                if value == "":
                    raise DataError(f"present extra field {name!r} must be non-empty; use NA")
                _check_text(value)

    def get(self, name: str) -> FieldValue:
        if name in CANONICAL_FIELDS:
            return getattr(self, name)
        return self.extra.get(name, NA)

    def with_field(self, name: str, value: FieldValue) -> "RegisterRecord":
        if name in CANONICAL_FIELDS:
            return replace(self, **{name: value})
        new_extra = dict(self.extra)
        new_extra[name] = value
        return replace(self, extra=new_extra)

    def main_values(self, main_variables: Sequence[str] = MAIN_VARIABLES) -> tuple[FieldValue, ...]:
        return tuple(self.get(name) for name in main_variables)

    def field_names(self) -> tuple[str, ...]:
        return CANONICAL_FIELDS + tuple(sorted(self.extra))


@dataclass(frozen=True)
class FieldDictionary:
    """Per-register metadata driving relabeling, standardization, and validation.

    valid_values entries are either an explicit set of permitted strings or
    an inclusive (low, high) integer range.
    """

    renames: Mapping[str, str] = field(default_factory=dict)
    value_maps: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    valid_values: Mapping[str, frozenset[str] | tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        targets = list(self.renames.values())
        dupes = {t for t in targets if targets.count(t) > 1}
        if dupes:
            raise ConfigError(f"multiple source fields rename to {sorted(dupes)}")

    def is_valid(self, name: str, value: str) -> bool:
        rule = self.valid_values[name]
        if isinstance(rule, tuple):
            low, high = rule
            try:
                return low <= int(value) <= high
            except ValueError:
                return False
        return value in rule

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FieldDictionary":
        valid: dict[str, frozenset[str] | tuple[int, int]] = {}
        for name, rule in raw.get("valid_values", {}).items():
            if isinstance(rule, Mapping):
                low, high = rule["range"]
                valid[name] = (int(low), int(high))
            else:
                valid[name] = frozenset(rule)
        return cls(
            renames=dict(raw.get("renames", {})),
            value_maps={k: dict(v) for k, v in raw.get("value_maps", {}).items()},
            valid_values=valid,
        )


@dataclass(frozen=True)
class Register:
    """A named, dated collection of records plus its field dictionary."""

    register_id: str
    reference_year: int
    records: tuple[RegisterRecord, ...]
    dictionary: FieldDictionary = field(default_factory=FieldDictionary)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not (1900 <= self.reference_year <= 2200):
            raise DataError(f"reference_year {self.reference_year} outside [1900, 2200]")
        for record in self.records:
            if record.register_id != self.register_id:
                raise DataError(
                    f"record carries register_id {record.register_id!r}, expected {self.register_id!r}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def with_records(self, records: Iterable[RegisterRecord]) -> "Register":
        return replace(self, records=tuple(records))

    def extra_field_names(self) -> tuple[str, ...]:
        names: set[str] = set()
        for record in self.records:
            names.update(record.extra)
        return tuple(sorted(names))


@dataclass(frozen=True, order=True)
class GlobalKey:
    """Synthetic person key created during integration."""

    value: str
    origin: str

    def __post_init__(self) -> None:
        if self.origin not in (ORIGIN_CITIZEN_ID, ORIGIN_COMBINED_KEY):
            raise DataError(f"unknown global key origin {self.origin!r}")


@dataclass
class IntegratedDatabase:
    """The post-join single table, one merged row per person."""

    rows: dict[GlobalKey, RegisterRecord]
    source_count: dict[GlobalKey, int]
    provenance: dict[tuple[GlobalKey, str], str]
    census_year: int
    register_ids: frozenset[str]

    def __post_init__(self) -> None:
        for key, count in self.source_count.items():
            if count < 1:
                raise DataError(f"source_count for {key.value} must be >= 1")

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class AgeBin:
    label: str
    lower: int
    upper: int | None  # inclusive; None marks the open-ended top bin


AGE_BINS: tuple[AgeBin, ...] = tuple(
    [AgeBin(f"{low}-{low + 4}", low, low + 4) for low in range(0, 70, 5)] + [AgeBin(">=70", 70, None)]
)

AGE_BIN_LABELS: tuple[str, ...] = tuple(b.label for b in AGE_BINS)


def bin_age(year_of_birth: int, census_year: int) -> AgeBin:
    """Place census_year - year_of_birth into one of the 15 five-year bins."""
    if year_of_birth > census_year:
        raise DataError(f"birth year {year_of_birth} after census year {census_year}")
    age = census_year - year_of_birth
    return AGE_BINS[min(age // 5, len(AGE_BINS) - 1)]


@dataclass(frozen=True)
class ReferenceCensus:
    """The traditional census used as the comparison standard."""

    persons: frozenset[str]
    sex_counts: Mapping[str, int]
    age_counts: Mapping[str, int]
    census_year: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "persons", frozenset(self.persons))
        if sum(self.sex_counts.values()) != len(self.persons):
            raise DataError("reference census sex counts do not sum to the person count")
        if sum(self.age_counts.values()) != len(self.persons):
            raise DataError("reference census age counts do not sum to the person count")

    def map_ids(self, transform: Callable[[str], str]) -> "ReferenceCensus":
        """Return a copy with every person id passed through transform
        (used to move a raw-id census into the de-identified id space)."""
        return ReferenceCensus(
            persons=frozenset(transform(p) for p in self.persons),
            sex_counts=dict(self.sex_counts),
            age_counts=dict(self.age_counts),
            census_year=self.census_year,
        )


def write_register_csv(register: Register, path: Path | str) -> None:
    """Canonical UTF-8 CSV: fixed columns, then extra fields sorted by name."""
    extras = register.extra_field_names()
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FIXED_COLUMNS + extras)
        for record in register.records:
            writer.writerow(_record_row(record, extras))


def _record_row(record: RegisterRecord, extras: Sequence[str]) -> list[str]:
    row = [encode_value(getattr(record, name)) for name in CANONICAL_FIELDS]
    row.append(record.register_id)
    row.append(str(record.record_timestamp))
    row.extend(encode_value(record.extra.get(name, NA)) for name in extras)
    return row


def read_register_csv(
    path: Path | str,
    reference_year: int,
    dictionary: FieldDictionary | None = None,
) -> Register:
    """Read a canonical CSV back into a Register.

    The register id is taken from the rows, which must all agree.
    """
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        records = [_record_from_row(header, row) for row in reader]
    ids = {r.register_id for r in records}
    if len(ids) != 1:
        raise DataError(f"canonical file {path} mixes register ids {sorted(ids)}")
    return Register(
        register_id=ids.pop(),
        reference_year=reference_year,
        records=tuple(records),
        dictionary=dictionary or FieldDictionary(),
    )


def _record_from_row(header: Sequence[str], row: Sequence[str]) -> RegisterRecord:
    cells = dict(zip(header, row))
    extra = {
        name: decode_value(cells[name])
        for name in header
        if name not in FIXED_COLUMNS
    }
    return RegisterRecord(
        register_id=cells["register_id"],
        record_timestamp=int(cells["record_timestamp"]),
        extra={k: v for k, v in extra.items() if isinstance(v, str)},
        **{name: decode_value(cells[name]) for name in CANONICAL_FIELDS},
    )
