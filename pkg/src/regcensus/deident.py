"""Salted SHA-256 de-identification and known-key record retrieval.

Hashing replaces sensitive identifiers with one-way digests while
keeping equality, so the digests still work as join keys. The digest is
SHA-256 over salt bytes followed by the UTF-8 value bytes; that order is
fixed, since both sides of every join must agree on it.
"""

from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError
from .records import (
    CANONICAL_FIELDS,
    IntegratedDatabase,
    Register,
    RegisterRecord,
    is_present,
)

MIN_SALT_LENGTH = 16


@dataclass(frozen=True, repr=False)
class Salt:
    """The secret key mixed into every digest. Never serialized."""

    secret: bytes

    def __post_init__(self) -> None:
        if len(self.secret) < MIN_SALT_LENGTH:
            raise ConfigError(f"salt must be at least {MIN_SALT_LENGTH} bytes")

    def __repr__(self) -> str:
        return "Salt(<redacted>)"

    __str__ = __repr__


@dataclass(frozen=True)
class DeidentPolicy:
    fields_to_hash: frozenset[str] = frozenset({"pid"})
    algorithm: str = "sha256"

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields_to_hash", frozenset(self.fields_to_hash))
        if not self.fields_to_hash:
            raise ConfigError("de-identification policy must name at least one field")
        if self.algorithm != "sha256":
            raise ConfigError(f"unsupported hash algorithm {self.algorithm!r}")


def load_salt(env_var: str | None = None, key_file: Path | str | None = None) -> Salt:
    """Load the salt from an environment variable (base64) or a key file
    (raw bytes). Never accept it on the command line; argv leaks into
    shell history and process listings."""
    if env_var:
        encoded = os.environ.get(env_var)
        if encoded is None:
            raise ConfigError(f"salt environment variable {env_var} is not set")
        try:
            return Salt(base64.b64decode(encoded, validate=True))
        except ValueError as err:
            raise ConfigError(f"salt environment variable {env_var} is not valid base64") from err
    if key_file:
        return Salt(Path(key_file).read_bytes())
    raise ConfigError("no salt source configured (need env var or key file)")


def hash_value(value: str, salt: Salt | bytes) -> str:
    """SHA-256(salt || value) as 64 lowercase hex chars.

    The fixed-length digest means nothing about the input length leaks,
    and equal inputs always collide to equal digests, which is what makes
    the output usable as a join key.
    """
    if not isinstance(value, str):
        raise DataError("cannot hash a not-available value; leave it NA")
    secret = salt.secret if isinstance(salt, Salt) else salt
    return hashlib.sha256(secret + value.encode("utf-8")).hexdigest()


def deidentify(register: Register, policy: DeidentPolicy, salt: Salt) -> Register:
    """Replace every present value of each policy field with its digest.

    NA stays NA, everything else is untouched.
    """
    known = set(CANONICAL_FIELDS) | set(register.extra_field_names())
    missing = policy.fields_to_hash - known
    if missing:
        raise ConfigError(f"policy fields not in register schema: {sorted(missing)}")
    out = []
    for record in register.records:
        for name in sorted(policy.fields_to_hash):
            value = record.get(name)
            if is_present(value):
                record = record.with_field(name, hash_value(value, salt))
        out.append(record)
    return register.with_records(out)


def retrieve(
    target: IntegratedDatabase | Register,
    original_id: str,
    salt: Salt | bytes,
) -> list[RegisterRecord]:
    """Find records whose pid digest matches the given original id.

    Requires the same salt that was used at de-identification time; an
    empty result simply means the id was never ingested.
    """
    digest = hash_value(original_id, salt)
    if isinstance(target, IntegratedDatabase):
        rows = target.rows.values()
    else:
        rows = target.records
    return [record for record in rows if record.pid == digest]
