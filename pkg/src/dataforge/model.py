"""Domain types and the dataset algebra.

Datasets are immutable values: an ordered set of content-addressed asset
keys plus an ordered list of annotation-pack references. Annotations are
resolved by folding packs in order with per-asset later-wins semantics;
merging applies primary-first precedence at whole-asset granularity.
All types are immutable after construction and all operations are pure,
so everything here is safe to call concurrently.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .canonical import is_hex_key
from .errors import (
    EmptyClassSet,
    EmptyMergeInput,
    InvalidTransition,
    MissingPack,
)

IMAGE_FORMATS = ("jpeg", "png")
OP_KINDS = ("import", "label", "train", "mine", "merge", "publish")
TASK_STATES = ("pending", "running", "done", "error")

# src marker for annotations created by dataset import: imports must be
# reproducible (same source -> same pack key), so the pack bytes cannot
# embed the per-run import task id.
IMPORT_SOURCE = "import"


@dataclass(frozen=True)
class Asset:
    """A raw image, identified by the SHA-1 of its bytes."""

    key: str
    width: int
    height: int
    format: str
    byte_size: int
    keywords: frozenset[str] = frozenset()

    def __post_init__(self):
        if not is_hex_key(self.key):
            raise ValueError(f"asset key must be 40 lowercase hex chars: {self.key!r}")
        if self.width < 1 or self.height < 1 or self.byte_size < 1:
            raise ValueError("asset dimensions and byte size must be >= 1")
        if self.format not in IMAGE_FORMATS:
            raise ValueError(f"unsupported image format: {self.format!r}")
        object.__setattr__(self, "keywords", frozenset(k.lower() for k in self.keywords))


@dataclass(frozen=True, order=True)
class Annotation:
    """One detection box in VOC convention (1-based, inclusive, xmin < xmax)."""

    asset_key: str
    class_name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int
    score: float | None = None
    source_task: str = IMPORT_SOURCE

    def box_sort_key(self):
        """Canonical within-asset ordering used by every serializer."""
        return (self.ymin, self.xmin, self.ymax, self.xmax, self.class_name)


def validate_annotation(a: Annotation, asset: Asset | None = None) -> list[str]:
    """Return every violated invariant of *a* (empty list means ok).

    Structural rules are always checked; bounds against image dimensions
    only when *asset* is given.
    """
    violations = []
    if not is_hex_key(a.asset_key):
        violations.append(f"asset_key is not a 40-hex key: {a.asset_key!r}")
    if not a.class_name or not a.class_name.strip():
        violations.append("class_name is empty")
    if a.xmin < 1:
        violations.append(f"xmin must be >= 1, got {a.xmin}")
    if a.ymin < 1:
        violations.append(f"ymin must be >= 1, got {a.ymin}")
    if a.xmin >= a.xmax:
        violations.append(f"xmin < xmax violated: {a.xmin} >= {a.xmax}")
    if a.ymin >= a.ymax:
        violations.append(f"ymin < ymax violated: {a.ymin} >= {a.ymax}")
    if a.score is not None and not (0.0 <= a.score <= 1.0):
        violations.append(f"score outside [0,1]: {a.score}")
    if asset is not None:
        if a.asset_key != asset.key:
            violations.append("annotation asset_key does not match asset")
        if a.xmax > asset.width:
            violations.append(f"xmax {a.xmax} exceeds image width {asset.width}")
        if a.ymax > asset.height:
            violations.append(f"ymax {a.ymax} exceeds image height {asset.height}")
    return violations


@dataclass(frozen=True)
class Dataset:
    """Unique-id collection of asset keys plus ordered pack references."""

    id: str
    name: str
    asset_keys: tuple[str, ...]
    pack_refs: tuple[str, ...] = ()
    created_by: str = ""

    def __post_init__(self):
        object.__setattr__(self, "asset_keys", tuple(self.asset_keys))
        object.__setattr__(self, "pack_refs", tuple(self.pack_refs))
        if len(set(self.asset_keys)) != len(self.asset_keys):
            raise ValueError("asset_keys contains duplicates")


@dataclass(frozen=True)
class ModelArtifact:
    """An opaque trained-model blob plus its declared metrics."""

    key: str
    metrics: Mapping[str, float]
    producing_task: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "metrics", dict(self.metrics))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        for name, value in self.metrics.items():
            if name.endswith("map") and not (0.0 <= value <= 1.0):
                raise ValueError(f"metric {name} outside [0,1]: {value}")


@dataclass
class TaskMeta:
    """Recorded type, parameters, inputs and outputs of one operation.

    Only op_kind, inputs and created_at are required in ``params``;
    operations attach arbitrary extra fields.
    """

    id: str
    op_kind: str
    params: dict
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    state: str = "pending"
    created_at: str = ""
    error_message: str | None = None

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            raise ValueError(f"unknown op kind: {self.op_kind!r}")
        if self.state not in TASK_STATES:
            raise ValueError(f"unknown task state: {self.state!r}")
        for required in ("op_kind", "inputs", "created_at"):
            self.params.setdefault(required, getattr(self, required))

    def transition(self, new_state: str, error_message: str | None = None) -> None:
        allowed = {"pending": {"running"}, "running": {"done", "error"}}
        if new_state not in allowed.get(self.state, set()):
            raise InvalidTransition(self.state, new_state)
        self.state = new_state
        if new_state == "error":
            self.error_message = error_message or "unknown error"


AnnotationMap = dict[str, list[Annotation]]
PackLoader = Callable[[str], "Mapping[str, list[Annotation]] | None"]


def resolve_annotations(pack_refs: Iterable[str], packs: PackLoader | Mapping) -> AnnotationMap:
    """Fold packs in list order into a per-asset annotation map.

    A later pack's entry for an asset wholly replaces any earlier entry
    for that asset. *packs* maps a pack key to its entries, either as a
    mapping or a loader callable; an unresolvable key raises MissingPack.
    """
    if isinstance(packs, Mapping):
        loader: PackLoader = packs.get
    else:
        loader = packs
    resolved: AnnotationMap = {}
    for ref in pack_refs:
        entries = loader(ref)
        if entries is None:
            raise MissingPack(ref)
        for asset_key, annotations in entries.items():
            resolved[asset_key] = list(annotations)
    return resolved


def resolve_dataset(dataset: Dataset, packs: PackLoader | Mapping) -> AnnotationMap:
    """Resolve a dataset's annotations; every member asset is present,
    unannotated ones with an empty list."""
    folded = resolve_annotations(dataset.pack_refs, packs)
    return {key: folded.get(key, []) for key in dataset.asset_keys}


def filter_by_classes(
    dataset: Dataset, classes: Iterable[str], packs: PackLoader | Mapping
) -> AnnotationMap:
    """Resolved annotations with boxes outside *classes* removed.

    Assets left with zero boxes stay present with empty lists.
    """
    wanted = set(classes)
    if not wanted:
        raise EmptyClassSet()
    resolved = resolve_dataset(dataset, packs)
    return {
        key: [a for a in annotations if a.class_name in wanted]
        for key, annotations in resolved.items()
    }


def merge_datasets(
    primary: Dataset,
    secondaries: list[Dataset],
    packs: PackLoader | Mapping,
    new_id: str | None = None,
    created_by: str = "",
) -> tuple[Dataset, AnnotationMap]:
    """Merge *secondaries* into *primary* under primary-first precedence.

    Asset order is the primary's followed by each secondary's in list
    order (first occurrence wins). Annotation conflicts are resolved at
    whole-asset granularity: the highest-precedence input that annotates
    an asset contributes that asset's annotations verbatim, never mixed.
    The merged dataset gets a fresh id, inherits the primary's name, and
    carries the winning annotations as its (storage-assigned) packs; the
    returned map is the merge's resolved annotations.
    """
    if not secondaries:
        raise EmptyMergeInput()
    inputs = [primary, *secondaries]
    asset_keys: list[str] = []
    seen: set[str] = set()
    for ds in inputs:
        for key in ds.asset_keys:
            if key not in seen:
                seen.add(key)
                asset_keys.append(key)
    merged: AnnotationMap = {key: [] for key in asset_keys}
    # Lowest precedence first so higher-precedence inputs overwrite.
    for ds in reversed(inputs):
        resolved = resolve_dataset(ds, packs)
        for key, annotations in resolved.items():
            if annotations:
                merged[key] = list(annotations)
    dataset = Dataset(
        id=new_id or str(uuid.uuid4()),
        name=primary.name,
        asset_keys=tuple(asset_keys),
        pack_refs=(),
        created_by=created_by,
    )
    return dataset, merged


def with_pack_refs(dataset: Dataset, pack_refs: Iterable[str]) -> Dataset:
    return replace(dataset, pack_refs=tuple(pack_refs))
