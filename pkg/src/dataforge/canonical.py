"""Canonical text serialization and content hashing.

Every persistent artifact (annotation packs, commits, metadata records,
operator configs) is serialized to one canonical byte form so that equal
content always hashes to the same SHA-1 key on any machine: JSON objects
with lexicographically sorted keys, no insignificant whitespace, UTF-8,
LF line endings, NaN/Infinity rejected.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

_HEX_KEY_RE = re.compile(r"^[0-9a-f]{40}$")

# ISO-8601 UTC with microseconds, fixed width; the single timestamp format
# used everywhere so serialized records have stable byte lengths.
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


class NotCanonical(ValueError):
    """Value cannot be represented in the canonical form."""


def _check(value: Any, path: str = "$") -> None:
    if value is None or isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise NotCanonical(f"{path}: non-finite number")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise NotCanonical(f"{path}: non-string key {key!r}")
            _check(item, f"{path}.{key}")
        return
    raise NotCanonical(f"{path}: unsupported type {type(value).__name__}")


def dumps(value: Any) -> str:
    """Canonical JSON text for *value* (no trailing newline)."""
    _check(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def dump_line(value: Any) -> bytes:
    """One canonical record: UTF-8 bytes terminated by a single LF."""
    return dumps(value).encode("utf-8") + b"\n"


def dump_lines(values) -> bytes:
    return b"".join(dump_line(v) for v in values)


def loads(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return json.loads(text)


def load_lines(data: bytes) -> list[Any]:
    """Parse a line-oriented canonical file; empty input yields []."""
    out = []
    for raw in data.split(b"\n"):
        if raw:
            out.append(json.loads(raw.decode("utf-8")))
    return out


def sha1_hex(data: bytes) -> str:
    return hashlib.sha1(data).hexdigest()


def key_of(value: Any) -> str:
    """SHA-1 key of a value's single-record serialization."""
    return sha1_hex(dump_line(value))


def is_hex_key(value: str) -> bool:
    return isinstance(value, str) and bool(_HEX_KEY_RE.match(value))
