"""Command-line pipeline orchestration.

Stages run in order (ingest, cleanse, deident, integrate, enumerate,
evaluate), each writing its artifacts under the run directory. A stage
whose inputs are unchanged (by content digest) is not recomputed; its
output files are reused. One process owns a run directory at a time.

Exit codes: 2 configuration error, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import click

from . import report as report_mod
from .cleanse import DedupReport, dedup_register, standardize_values, validate_values
from .deident import DeidentPolicy, Salt, deidentify, hash_value, load_salt
from .errors import EXIT_CONFIG, EXIT_DATA, EXIT_IO, ConfigError, DataError
from .frameworks import enumerate_population, pyramid, write_population_json
from .ingest import IngestReport, ingest
from .integrate import integrate as integrate_registers
from .integrate import read_database, relabel_fields, write_database
from .quality import evaluate, evaluate_from_counts, rank_frameworks, report_from_dict
from .records import FIXED_COLUMNS, Register, read_register_csv, write_register_csv
from .runconfig import RunConfig, load_run_config
from .synth import ScenarioConfig, load_reference_census, write_scenario

STAGES = ("ingest", "cleanse", "deident", "integrate", "enumerate", "evaluate")


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_CONFIG)
        except DataError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_DATA)
        except OSError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


@contextmanager
def run_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"run directory {out_dir} is locked; remove {lock} if no other run is active"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _stage_digest(stage: str, config_bytes: bytes, inputs: Sequence[Path], extra: str = "") -> str:
    h = hashlib.sha256()
    h.update(stage.encode())
    h.update(config_bytes)
    for path in inputs:
        h.update(str(path.name).encode())
        h.update(_sha256_file(path).encode())
    h.update(extra.encode())
    return h.hexdigest()


def _salt_fingerprint(salt: Salt) -> str:
    return hashlib.sha256(b"regcensus.salt.fp:" + salt.secret).hexdigest()


def _load_manifest(out_dir: Path) -> dict:
    path = out_dir / "manifest.json"
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _save_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _fresh(manifest: dict, stage: str, digest: str, outputs: Sequence[Path]) -> bool:
    return manifest.get(stage) == digest and all(p.exists() for p in outputs)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rejects_csv(reports: Sequence[IngestReport], path: Path) -> None:
    extra_names = sorted(
        {
            name
            for report in reports
            for reject in report.rejects
            for name in reject.fields
            if name not in FIXED_COLUMNS
        }
    )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([*FIXED_COLUMNS, *extra_names, "reject_reason", "source_line_number"])
        for report in reports:
            for reject in report.rejects:
                row = []
                for name in FIXED_COLUMNS:
                    if name == "register_id":
                        row.append(report.register_id)
                    else:
                        row.append(reject.fields.get(name, ""))
                row.extend(reject.fields.get(name, "") for name in extra_names)
                row.extend([reject.reason, str(reject.source_line_number)])
                writer.writerow(row)


def _resolve_salt(config: RunConfig) -> Salt:
    return load_salt(env_var=config.salt_env, key_file=config.salt_file)


def _load_stage_registers(config: RunConfig, stage_dir: Path) -> list[Register]:
    registers = []
    for source in config.sources:
        registers.append(
            read_register_csv(
                stage_dir / f"{source.register_id}.csv",
                reference_year=source.reference_year,
                dictionary=source.dictionary,
            )
        )
    return registers


def stage_ingest(config: RunConfig, config_bytes: bytes, out_dir: Path, manifest: dict) -> list[Register]:
    stage_dir = out_dir / "ingest"
    outputs = [stage_dir / f"{s.register_id}.csv" for s in config.sources]
    outputs += [out_dir / "rejects.csv", stage_dir / "ingest_report.json"]
    digest = _stage_digest("ingest", config_bytes, [s.path for s in config.sources])
    if _fresh(manifest, "ingest", digest, outputs):
        return _load_stage_registers(config, stage_dir)
    stage_dir.mkdir(parents=True, exist_ok=True)
    registers: list[Register] = []
    reports: list[IngestReport] = []
    for source in config.sources:
        register, report = ingest(source)
        registers.append(register)
        reports.append(report)
        write_register_csv(register, stage_dir / f"{source.register_id}.csv")
    _write_rejects_csv(reports, out_dir / "rejects.csv")
    _write_json(
        stage_dir / "ingest_report.json",
        [
            {
                "register_id": r.register_id,
                "source_path": Path(r.source_path).name,
                "total_records": r.total_records,
                "accepted": r.accepted,
                "rejected_by_reason": r.rejected_by_reason(),
                "encoding_warnings": r.encoding_warnings,
            }
            for r in reports
        ],
    )
    manifest["ingest"] = digest
    _save_manifest(out_dir, manifest)
    return registers


def stage_cleanse(
    config: RunConfig,
    config_bytes: bytes,
    out_dir: Path,
    manifest: dict,
    salt: Salt,
    registers: list[Register] | None = None,
) -> list[Register]:
    stage_dir = out_dir / "cleanse"
    inputs = [out_dir / "ingest" / f"{s.register_id}.csv" for s in config.sources]
    outputs = [stage_dir / f"{s.register_id}.csv" for s in config.sources]
    outputs += [out_dir / "dedup_report.csv", stage_dir / "cleanse_report.json"]
    digest = _stage_digest("cleanse", config_bytes, inputs, extra=_salt_fingerprint(salt))
    if _fresh(manifest, "cleanse", digest, outputs):
        return _load_stage_registers(config, stage_dir)
    if registers is None:
        registers = _load_stage_registers(config, out_dir / "ingest")
    stage_dir.mkdir(parents=True, exist_ok=True)

    def pid_digest(pid: str) -> str:
        return hash_value(pid, salt)

    cleaned: list[Register] = []
    merged_report = DedupReport()
    summary = []
    for register in registers:
        register = relabel_fields(register)
        register = standardize_values(register)
        register, tally = validate_values(register)
        register, dedup_report = dedup_register(register, pid_digest=pid_digest)
        merged_report.entries.extend(dedup_report.entries)
        cleaned.append(register)
        write_register_csv(register, stage_dir / f"{register.register_id}.csv")
        summary.append(
            {
                "register_id": register.register_id,
                "records": len(register),
                "invalid_replaced": tally,
                "dedup_groups_kept": dedup_report.kept_groups,
                "dedup_groups_dropped": dedup_report.dropped_groups,
            }
        )
    merged_report.write_csv(out_dir / "dedup_report.csv")
    _write_json(stage_dir / "cleanse_report.json", summary)
    manifest["cleanse"] = digest
    _save_manifest(out_dir, manifest)
    return cleaned


def stage_deident(
    config: RunConfig,
    config_bytes: bytes,
    out_dir: Path,
    manifest: dict,
    salt: Salt,
    registers: list[Register] | None = None,
) -> list[Register]:
    stage_dir = out_dir / "deident"
    inputs = [out_dir / "cleanse" / f"{s.register_id}.csv" for s in config.sources]
    outputs = [stage_dir / f"{s.register_id}.csv" for s in config.sources]
    digest = _stage_digest("deident", config_bytes, inputs, extra=_salt_fingerprint(salt))
    if _fresh(manifest, "deident", digest, outputs):
        return _load_stage_registers(config, stage_dir)
    if registers is None:
        registers = _load_stage_registers(config, out_dir / "cleanse")
    stage_dir.mkdir(parents=True, exist_ok=True)
    policy = DeidentPolicy(fields_to_hash=config.deident_fields)
    hashed = [deidentify(r, policy, salt) for r in registers]
    for register in hashed:
        write_register_csv(register, stage_dir / f"{register.register_id}.csv")
    manifest["deident"] = digest
    _save_manifest(out_dir, manifest)
    return hashed


def stage_integrate(
    config: RunConfig,
    config_bytes: bytes,
    out_dir: Path,
    manifest: dict,
    registers: list[Register] | None = None,
):
    stage_dir = out_dir / "integrate"
    inputs = [out_dir / "deident" / f"{s.register_id}.csv" for s in config.sources]
    outputs = [
        stage_dir / "integrated.csv",
        stage_dir / "provenance.csv",
        stage_dir / "integration_log.json",
        out_dir / "integration_log.json",
    ]
    digest = _stage_digest("integrate", config_bytes, inputs)
    if _fresh(manifest, "integrate", digest, outputs):
        return read_database(stage_dir)
    if registers is None:
        registers = _load_stage_registers(config, out_dir / "deident")
    stage_dir.mkdir(parents=True, exist_ok=True)
    database, log = integrate_registers(
        registers, keys=config.key_spec, policy=config.policy, census_year=config.census_year
    )
    write_database(database, log, stage_dir)
    (out_dir / "integration_log.json").write_text(
        (stage_dir / "integration_log.json").read_text(encoding="utf-8"), encoding="utf-8"
    )
    manifest["integrate"] = digest
    _save_manifest(out_dir, manifest)
    return database, log


def stage_enumerate(config: RunConfig, config_bytes: bytes, out_dir: Path, manifest: dict, database=None):
    stage_dir = out_dir / "enumerate"
    inputs = [out_dir / "integrate" / "integrated.csv"]
    outputs = [out_dir / "pyramid.csv"]
    for spec in config.frameworks:
        outputs += [stage_dir / f"population_{spec.kind}.json", stage_dir / f"pyramid_{spec.kind}.csv"]
    digest = _stage_digest("enumerate", config_bytes, inputs)
    if _fresh(manifest, "enumerate", digest, outputs):
        return None  # evaluate re-enumerates in memory when it needs populations
    if database is None:
        database, _ = read_database(out_dir / "integrate")
    stage_dir.mkdir(parents=True, exist_ok=True)
    populations = {}
    for index, spec in enumerate(config.frameworks):
        population = enumerate_population(database, spec)
        populations[spec.kind] = population
        write_population_json(population, stage_dir / f"population_{spec.kind}.json")
        table = pyramid(population)
        table.write_csv(stage_dir / f"pyramid_{spec.kind}.csv")
        if index == 0:
            table.write_csv(out_dir / "pyramid.csv")
    manifest["enumerate"] = digest
    _save_manifest(out_dir, manifest)
    return populations


def stage_evaluate(
    config: RunConfig,
    config_bytes: bytes,
    out_dir: Path,
    manifest: dict,
    salt: Salt,
    database=None,
    populations=None,
):
    if config.reference_census_path is None:
        raise ConfigError("evaluate needs a reference_census entry in the config")
    inputs = [out_dir / "integrate" / "integrated.csv", config.reference_census_path]
    outputs = [out_dir / "report.json", out_dir / "tables.txt"]
    digest = _stage_digest("evaluate", config_bytes, inputs, extra=_salt_fingerprint(salt))
    if _fresh(manifest, "evaluate", digest, outputs):
        return None
    if database is None:
        database, _ = read_database(out_dir / "integrate")
    reference = load_reference_census(config.reference_census_path)
    if not config.reference_prehashed:
        reference = reference.map_ids(lambda pid: hash_value(pid, salt))
    if populations is None:
        populations = {
            spec.kind: enumerate_population(database, spec) for spec in config.frameworks
        }
    reports = [(kind, evaluate(populations[kind], reference)) for kind in populations]
    ranking = rank_frameworks(reports) if len(reports) >= 2 else None
    (out_dir / "report.json").write_text(
        report_mod.build_report_json(reports, ranking), encoding="utf-8"
    )
    sex_counts = {kind: dict(pop.by_sex) for kind, pop in populations.items()}
    (out_dir / "tables.txt").write_text(
        report_mod.render_tables(reports, ranking, sex_counts), encoding="utf-8"
    )
    manifest["evaluate"] = digest
    _save_manifest(out_dir, manifest)
    return reports, ranking


def _execute(config_path: Path, out_dir: Path, stages: Sequence[str]) -> None:
    config = load_run_config(config_path)
    config_bytes = config_path.read_bytes()
    with run_lock(out_dir):
        manifest = _load_manifest(out_dir)
        needs_salt = any(s in stages for s in ("cleanse", "deident", "evaluate"))
        salt = _resolve_salt(config) if needs_salt else None
        registers = None
        database = None
        populations = None
        if "ingest" in stages:
            registers = stage_ingest(config, config_bytes, out_dir, manifest)
        if "cleanse" in stages:
            registers = stage_cleanse(config, config_bytes, out_dir, manifest, salt, registers)
        if "deident" in stages:
            registers = stage_deident(config, config_bytes, out_dir, manifest, salt, registers)
        if "integrate" in stages:
            database, _ = stage_integrate(config, config_bytes, out_dir, manifest, registers)
        if "enumerate" in stages:
            populations = stage_enumerate(config, config_bytes, out_dir, manifest, database)
        if "evaluate" in stages:
            stage_evaluate(config, config_bytes, out_dir, manifest, salt, database, populations)


@click.group()
def main() -> None:
    """Register-based census toolkit."""


def _stage_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
    @click.option("--out-dir", required=True, type=click.Path(path_type=Path))
    @handle_errors
    def command(config_path: Path, out_dir: Path) -> None:
        _execute(config_path, out_dir, (name,))

    return command


_stage_command("ingest", "Parse the configured source files into canonical registers.")
_stage_command("cleanse", "Relabel, standardize, validate, and deduplicate ingested registers.")
_stage_command("deident", "Hash the configured identifier fields with the salt.")
_stage_command("integrate", "Join the de-identified registers into one database.")
_stage_command("enumerate", "Enumerate the census population under each configured framework.")
_stage_command("evaluate", "Score each framework against the reference census and rank them.")


@main.command(help="Run every stage: ingest through evaluate.")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--stages", default=",".join(STAGES), show_default=True, help="Comma-separated subset of stages.")
@handle_errors
def run(config_path: Path, out_dir: Path, stages: str) -> None:
    wanted = tuple(s.strip() for s in stages.split(",") if s.strip())
    unknown = [s for s in wanted if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages: {', '.join(unknown)}")
    _execute(config_path, out_dir, wanted)


@main.command(help="Generate a synthetic scenario: registers, reference census, ground truth.")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@handle_errors
def synth(scenario_path: Path, out_dir: Path, seed: int | None) -> None:
    raw = json.loads(scenario_path.read_text(encoding="utf-8"))
    if seed is not None:
        raw["seed"] = seed
    config = ScenarioConfig.from_dict(raw)
    registers, _, _ = write_scenario(config, out_dir)
    _write_json(out_dir / "run_config.json", _synth_run_config(config))
    click.echo(f"wrote {len(registers)} registers under {out_dir}")


def _synth_run_config(config: ScenarioConfig) -> dict:
    frameworks = [{"kind": k} for k in ("F1", "F2", "F3", "F4")]
    if len(config.years) >= 2:
        frameworks.append({"kind": "F5", "min_registers": 2})
    return {
        "census_year": config.census_year,
        "census_area_codes": sorted(config.census_area_codes),
        "sources": [
            {
                "path": f"bmn{year}.csv",
                "format": {"type": "delimited"},
                "register_id": f"bmn{year}",
                "reference_year": year,
                "dictionary": {
                    "valid_values": {
                        "sex": ["M", "F"],
                        "year_of_birth": {"range": [1850, config.census_year]},
                    }
                },
            }
            for year in config.years
        ],
        "key_spec": {"fallback_enabled": True},
        "replacement_policy": {"strategy": "timeline"},
        "frameworks": frameworks,
        "reference_census": {"path": "reference_census.json"},
        "salt": {"key_file": "salt.key"},
        "deident_fields": ["pid"],
    }


@main.command(help="Score and rank candidates from a published-counts fixture.")
@click.option("--counts", "counts_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@handle_errors
def report(counts_path: Path, out_dir: Path) -> None:
    raw = json.loads(counts_path.read_text(encoding="utf-8"))
    _, candidates = report_mod.parse_counts_fixture(raw)
    reports = [
        (c["label"], evaluate_from_counts(c["t_size"], c["r_size"], c["t_and_r"], c["sex_r"], c["sex_t"], c["age_r"], c["age_t"]))
        for c in candidates
    ]
    ranking = rank_frameworks(reports) if len(reports) >= 2 else None
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_mod.build_report_json(reports, ranking), encoding="utf-8")
    tables = report_mod.render_tables(
        reports, ranking, {c["label"]: c["sex_r"] for c in candidates}
    )
    (out_dir / "tables.txt").write_text(tables, encoding="utf-8")
    click.echo(tables, nl=False)


@main.command(help="Recompute the ranking table from an existing report.json.")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, path_type=Path))
@handle_errors
def rank(report_path: Path) -> None:
    raw = json.loads(report_path.read_text(encoding="utf-8"))
    reports = [(entry["label"], report_from_dict(entry)) for entry in raw["candidates"]]
    ranking = rank_frameworks(reports)
    click.echo(report_mod.render_ranking_table(ranking))


if __name__ == "__main__":
    main()
