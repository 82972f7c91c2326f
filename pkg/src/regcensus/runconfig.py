"""Run configuration: one JSON file declaring sources, dictionaries,
keys, policy, frameworks, and the reference census."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .frameworks import FrameworkSpec
from .ingest import Composite, Delimited, FixedWidth, SourceSpec, SplitRule
from .integrate import KeySpec, ReplacementPolicy
from .records import FieldDictionary


@dataclass(frozen=True)
class RunConfig:
    census_year: int
    census_area_codes: frozenset[str]
    sources: tuple[SourceSpec, ...]
    key_spec: KeySpec
    policy: ReplacementPolicy
    frameworks: tuple[FrameworkSpec, ...]
    reference_census_path: Path | None
    reference_prehashed: bool
    salt_env: str | None
    salt_file: Path | None
    deident_fields: frozenset[str]


def _parse_format(raw: Mapping, where: str):
    kind = raw.get("type")
    if kind == "delimited":
        return Delimited(delimiter=raw.get("delimiter", ","), quote=raw.get("quote", '"'))
    if kind == "fixed_width":
        return FixedWidth(fields=tuple((f[0], int(f[1]), int(f[2])) for f in raw["fields"]))
    if kind == "composite":
        rules = tuple(
            SplitRule(
                source_column=r["source_column"],
                separator=r["separator"] if isinstance(r["separator"], str) else tuple(r["separator"]),
                targets=tuple(r["targets"]),
            )
            for r in raw.get("split_rules", [])
        )
        return Composite(base=_parse_format(raw["base"], where), split_rules=rules)
    raise ConfigError(f"{where}: unknown source format {kind!r}")


def load_run_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err

    try:
        census_year = int(raw["census_year"])
        base_dir = path.parent
        sources = []
        for i, src in enumerate(raw["sources"]):
            where = f"sources[{i}]"
            sources.append(
                SourceSpec(
                    path=base_dir / src["path"],
                    format=_parse_format(src["format"], where),
                    register_id=src["register_id"],
                    reference_year=int(src["reference_year"]),
                    encoding=src.get("encoding", "utf-8"),
                    dictionary=FieldDictionary.from_dict(src.get("dictionary", {})),
                    default_timestamp=src.get("default_timestamp"),
                )
            )
        key_raw = raw.get("key_spec", {})
        key_spec = KeySpec(fallback_enabled=bool(key_raw.get("fallback_enabled", True)))
        policy_raw = raw.get("replacement_policy", {})
        policy = ReplacementPolicy(
            strategy=policy_raw.get("strategy", "timeline"),
            source_priority=tuple(policy_raw.get("source_priority", ())),
        )
        area_codes = frozenset(raw.get("census_area_codes", ()))
        frameworks = tuple(
            FrameworkSpec(
                kind=fw["kind"],
                census_area_codes=area_codes,
                min_registers=int(fw.get("min_registers", 2)),
                pid_on_all_registers=bool(fw.get("pid_on_all_registers", False)),
            )
            for fw in raw.get("frameworks", [])
        )
        reference_raw = raw.get("reference_census")
        reference_path = base_dir / reference_raw["path"] if reference_raw else None
        reference_prehashed = bool(reference_raw.get("pre_hashed", False)) if reference_raw else False
        salt_raw = raw.get("salt", {})
        return RunConfig(
            census_year=census_year,
            census_area_codes=area_codes,
            sources=tuple(sources),
            key_spec=key_spec,
            policy=policy,
            frameworks=frameworks,
            reference_census_path=reference_path,
            reference_prehashed=reference_prehashed,
            salt_env=salt_raw.get("env"),
            salt_file=base_dir / salt_raw["key_file"] if salt_raw.get("key_file") else None,
            deident_fields=frozenset(raw.get("deident_fields", ("pid",))),
        )
    except KeyError as err:
        raise ConfigError(f"config {path} is missing required key {err}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f"config {path} is malformed: {err}") from err
