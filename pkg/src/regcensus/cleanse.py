"""Value standardization, invalid-value removal, and duplicate resolution."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .records import NA, Register, is_present

ACTION_KEPT_LATEST = "kept_latest"
ACTION_DROPPED_ALL = "dropped_all"


@dataclass
class DedupEntry:
    pid_prefix: str  # first 8 hex chars of the pid digest, never the raw pid
    group_size: int
    action: str


@dataclass
class DedupReport:
    entries: list[DedupEntry] = field(default_factory=list)

    @property
    def dropped_groups(self) -> int:
        return sum(1 for e in self.entries if e.action == ACTION_DROPPED_ALL)

    @property
    def kept_groups(self) -> int:
        return sum(1 for e in self.entries if e.action == ACTION_KEPT_LATEST)

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["pid_prefix", "group_size", "action"])
            for entry in sorted(self.entries, key=lambda e: e.pid_prefix):
                writer.writerow([entry.pid_prefix, entry.group_size, entry.action])


def _default_pid_digest(pid: str) -> str:
    return hashlib.sha256(pid.encode("utf-8")).hexdigest()


def standardize_values(register: Register) -> Register:
    """Map source codings onto the canonical ones ('1' -> 'M', ...).

    Values without a mapping pass through; validate_values deals with
    them afterwards.
    """
    value_maps = register.dictionary.value_maps
    if not value_maps:
        return register
    out = []
    for record in register.records:
        for name, mapping in value_maps.items():
            value = record.get(name)
            if is_present(value) and value in mapping:
                record = record.with_field(name, mapping[value])
        out.append(record)
    return register.with_records(out)


def validate_values(register: Register) -> tuple[Register, dict[str, int]]:
    """Replace values outside their field's valid set with NA.

    Returns the cleaned register and a per-field tally of replacements.
    """
    rules = register.dictionary.valid_values
    tally: dict[str, int] = {name: 0 for name in rules}
    if not rules:
        return register, tally
    out = []
    for record in register.records:
        for name in rules:
            value = record.get(name)
            if is_present(value) and not register.dictionary.is_valid(name, value):
                record = record.with_field(name, NA)
                tally[name] += 1
        out.append(record)
    return register.with_records(out), tally


def dedup_register(
    register: Register,
    pid_digest: Callable[[str], str] | None = None,
) -> tuple[Register, DedupReport]:
    """Resolve rows sharing a pid within one register.

    Rows whose newest records agree on the six main variables keep the
    newest one; if the newest records disagree with each other there is
    no way to tell which row is reliable, so the whole group is removed.
    Rows with no pid cannot be grouped and pass through untouched.
    """
    digest = pid_digest or _default_pid_digest
    groups: dict[str, list[int]] = {}
    for index, record in enumerate(register.records):
        if is_present(record.pid):
            groups.setdefault(record.pid, []).append(index)

    report = DedupReport()
    drop: set[int] = set()
    for pid, indexes in groups.items():
        if len(indexes) == 1:
            continue
        rows = [register.records[i] for i in indexes]
        newest_ts = max(r.record_timestamp for r in rows)
        newest = [(i, r) for i, r in zip(indexes, rows) if r.record_timestamp == newest_ts]
        agreed = len({r.main_values() for _, r in newest}) == 1
        if agreed:
            keep_index = newest[0][0]
            drop.update(i for i in indexes if i != keep_index)
            action = ACTION_KEPT_LATEST
        else:
            drop.update(indexes)
            action = ACTION_DROPPED_ALL
        report.entries.append(DedupEntry(digest(pid)[:8], len(indexes), action))

    survivors = [r for i, r in enumerate(register.records) if i not in drop]
    return register.with_records(survivors), report
