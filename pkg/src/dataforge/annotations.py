"""Incremental annotation packs and the fixed/mutable metadata store.

A pack is an immutable delta of annotations produced by one operation,
serialized canonically (one record per line, records sorted by asset
then by box) and stored write-once under the SHA-1 of its bytes. Pack
bytes depend only on the entries, never on repository size, which is
what keeps annotation appends O(change) instead of O(dataset).

Metadata records are single canonical-JSON files split into fixed/
(write-once, e.g. image attributes) and mutable/ (last write wins,
e.g. task context) areas.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from . import canonical
from .errors import (
    CorruptPack,
    FixedRecordConflict,
    InvalidAnnotation,
    NotFound,
)
from .model import Annotation, validate_annotation
from .objectstore import _atomic_write

PackEntries = dict[str, list[Annotation]]


def annotation_to_record(a: Annotation) -> dict:
    return {
        "asset": a.asset_key,
        "class": a.class_name,
        "score": a.score,
        "src": a.source_task,
        "xmax": a.xmax,
        "xmin": a.xmin,
        "ymax": a.ymax,
        "ymin": a.ymin,
    }


def annotation_from_record(record: dict) -> Annotation:
    try:
        return Annotation(
            asset_key=record["asset"],
            class_name=record["class"],
            xmin=record["xmin"],
            ymin=record["ymin"],
            xmax=record["xmax"],
            ymax=record["ymax"],
            score=record["score"],
            source_task=record["src"],
        )
    except KeyError as e:
        raise InvalidAnnotation(f"annotation record missing field {e}") from e


def serialize_entries(entries) -> bytes:
    """Canonical pack bytes: entries sorted by asset key, boxes by the
    canonical box order, one annotation record per line.

    Accepts a mapping or an iterable of (asset_key, annotations) pairs;
    a repeated asset key or an empty annotation list is rejected (an
    asset's entry is always its complete box set, so an empty entry has
    no canonical representation).
    """
    if isinstance(entries, Mapping):
        pairs = list(entries.items())
    else:
        pairs = list(entries)
    by_asset: dict[str, list[Annotation]] = {}
    for asset_key, annotations in pairs:
        if asset_key in by_asset:
            raise InvalidAnnotation(f"asset {asset_key} appears more than once in pack")
        annotations = list(annotations)
        if not annotations:
            raise InvalidAnnotation(f"asset {asset_key} has an empty annotation list")
        by_asset[asset_key] = annotations
    records = []
    for asset_key in sorted(by_asset):
        for a in sorted(by_asset[asset_key], key=Annotation.box_sort_key):
            problems = validate_annotation(a)
            if problems:
                raise InvalidAnnotation("; ".join(problems))
            if a.asset_key != asset_key:
                raise InvalidAnnotation(
                    f"annotation for {a.asset_key} filed under entry {asset_key}"
                )
            records.append(annotation_to_record(a))
    return canonical.dump_lines(records)


def parse_entries(data: bytes) -> PackEntries:
    entries: PackEntries = {}
    for record in canonical.load_lines(data):
        a = annotation_from_record(record)
        entries.setdefault(a.asset_key, []).append(a)
    return entries


class PackStore:
    """Write-once, content-addressed pack files: packs/<sha1>.cjsonl."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.reads = 0  # read_pack call counter, used by export-cost tests

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.cjsonl"

    def write_pack(self, entries, producing_task: str = "") -> str:
        data = serialize_entries(entries)
        key = canonical.sha1_hex(data)
        path = self._path(key)
        if not path.exists():
            _atomic_write(path, data)
        return key

    def read_pack(self, key: str) -> PackEntries:
        self.reads += 1
        path = self._path(key)
        if not canonical.is_hex_key(key) or not path.exists():
            raise NotFound(key, "pack")
        data = path.read_bytes()
        if canonical.sha1_hex(data) != key:
            raise CorruptPack(key)
        return parse_entries(data)

    def has_pack(self, key: str) -> bool:
        return canonical.is_hex_key(key) and self._path(key).exists()

    def loader(self):
        """Pack loader usable with the dataset algebra (None on miss)."""

        def load(key: str):
            try:
                return self.read_pack(key)
            except NotFound:
                return None

        return load


@dataclass(frozen=True)
class MetadataRecord:
    key: str
    kind: str  # fixed | mutable
    body: dict


def _escape(key: str) -> str:
    return key.replace("%", "%25").replace("/", "%2F")


class MetadataStore:
    """Fixed and mutable metadata, one canonical record per file."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / _escape(key)

    def put(self, record: MetadataRecord) -> None:
        if record.kind not in ("fixed", "mutable"):
            raise ValueError(f"unknown metadata kind: {record.kind!r}")
        if not record.key:
            raise ValueError("metadata key must be non-empty")
        data = canonical.dump_line(
            {"body": record.body, "key": record.key, "kind": record.kind}
        )
        path = self._path(record.kind, record.key)
        if record.kind == "fixed" and path.exists():
            if path.read_bytes() != data:
                raise FixedRecordConflict(record.key)
            return
        _atomic_write(path, data)

    def get(self, key: str) -> MetadataRecord:
        for kind in ("fixed", "mutable"):
            path = self._path(kind, key)
            if path.exists():
                record = canonical.loads(path.read_bytes())
                return MetadataRecord(key=record["key"], kind=record["kind"], body=record["body"])
        raise NotFound(key, "metadata record")

    def has(self, key: str) -> bool:
        return any(self._path(kind, key).exists() for kind in ("fixed", "mutable"))

    def keys(self, prefix: str = "") -> list[str]:
        found = set()
        for kind in ("fixed", "mutable"):
            base = self.root / kind
            if not base.is_dir():
                continue
            for f in base.iterdir():
                key = f.name.replace("%2F", "/").replace("%25", "%")
                if key.startswith(prefix):
                    found.add(key)
        return sorted(found)
