"""Deterministic mock operators: training, inference and labeling.

These stand in for real tools (a detector trainer, its inference
runtime, an annotation service) so end-to-end loops run hermetically at
desk scale. The trainer is a pure function of its input dataset; the
inference op derives pseudo-predictions from SHA-1(model seed + asset
key); the labeler copies boxes from a ground-truth oracle. Real tools
plug in through the same directory-exchange protocol.
"""

from __future__ import annotations

import hashlib
from dataclasses import replace
from typing import Iterable, Mapping

from .. import canonical
from ..errors import NoLabels, OracleMiss, UnknownModelFormat
from ..model import Annotation
from ..annotations import annotation_from_record, annotation_to_record
from .scoring import PredictedBox, Prediction


# --- training ------------------------------------------------------------

def train_model(asset_keys: Iterable[str], annotations: Mapping[str, list[Annotation]],
                classes: Iterable[str] | None = None) -> tuple[bytes, dict]:
    """Deterministic pseudo-training.

    The model blob is the canonical serialization of the class list,
    per-class box-count priors and a seed hashed from the sorted asset
    keys; metrics report map50 = fraction of training assets carrying at
    least one (in-class) box. Clearly synthetic, but a pure function of
    the dataset, which is what the pipeline tests need.
    """
    asset_keys = list(asset_keys)
    wanted = set(classes) if classes else None
    boxes_by_asset: dict[str, list[Annotation]] = {}
    for key in asset_keys:
        kept = [
            a for a in annotations.get(key, [])
            if wanted is None or a.class_name in wanted
        ]
        if kept:
            boxes_by_asset[key] = kept
    if not boxes_by_asset:
        raise NoLabels()
    class_names = sorted(wanted) if wanted else sorted(
        {a.class_name for boxes in boxes_by_asset.values() for a in boxes}
    )
    priors: dict[str, int] = {name: 0 for name in class_names}
    for boxes in boxes_by_asset.values():
        for a in boxes:
            priors[a.class_name] += 1
    seed = hashlib.sha1(
        b"".join(key.encode() + b"\n" for key in sorted(asset_keys))
    ).hexdigest()
    blob = canonical.dump_line({"classes": class_names, "priors": priors, "seed": seed})
    metrics = {"map50": len(boxes_by_asset) / len(asset_keys)}
    return blob, metrics


def parse_model(blob: bytes) -> dict:
    try:
        record = canonical.loads(blob)
        classes = record["classes"]
        seed = record["seed"]
        priors = record["priors"]
    except (ValueError, KeyError, TypeError) as e:
        raise UnknownModelFormat(f"not a recognizable model blob: {e}") from e
    if not isinstance(classes, list) or not isinstance(seed, str) or not isinstance(priors, dict):
        raise UnknownModelFormat("model blob fields have wrong shapes")
    return {"classes": classes, "priors": priors, "seed": seed}


# --- inference -----------------------------------------------------------

def _byte_stream(seed: bytes):
    counter = 0
    while True:
        block = hashlib.sha1(seed + counter.to_bytes(4, "big")).digest()
        yield from block
        counter += 1


def mock_infer(model: dict, asset_key: str, width: int, height: int) -> Prediction:
    """Pseudo-predictions, a pure function of (model seed, asset key)."""
    digest = hashlib.sha1((model["seed"] + asset_key).encode()).digest()
    stream = _byte_stream(digest)
    n_boxes = digest[0] % 4
    class_count = max(len(model["classes"]), 1)
    boxes = []
    for _ in range(n_boxes):
        xa = 1 + next(stream) % width
        xb = 1 + next(stream) % width
        ya = 1 + next(stream) % height
        yb = 1 + next(stream) % height
        xmin, xmax = min(xa, xb), max(xa, xb)
        ymin, ymax = min(ya, yb), max(ya, yb)
        if xmin == xmax:
            xmax = xmin + 1 if xmax < width else xmax
            xmin = xmin - 1 if xmin == xmax else xmin
        if ymin == ymax:
            ymax = ymin + 1 if ymax < height else ymax
            ymin = ymin - 1 if ymin == ymax else ymin
        raw = [next(stream) / 255.0 for _ in range(class_count)]
        total = sum(raw) + 1.0  # leaves implicit background mass, sum < 1
        probs = tuple(r / total for r in raw)
        boxes.append(PredictedBox(class_probs=probs, xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax))
    return Prediction(asset_key=asset_key, boxes=tuple(boxes))


# --- labeling ------------------------------------------------------------

def mock_label(asset_keys: Iterable[str], oracle: Mapping[str, list[Annotation]],
               task_id: str) -> dict[str, list[Annotation]]:
    """Copy ground-truth boxes for exactly the given assets, stamped with
    the labeling task. An asset missing from the oracle is an error; one
    the oracle marks box-free yields no pack entry."""
    entries: dict[str, list[Annotation]] = {}
    for key in asset_keys:
        if key not in oracle:
            raise OracleMiss(key)
        boxes = [replace(a, asset_key=key, source_task=task_id) for a in oracle[key]]
        if boxes:
            entries[key] = boxes
    return entries


# --- oracle files ---------------------------------------------------------

def write_oracle(path, oracle: Mapping[str, list[Annotation]]) -> None:
    """Ground-truth file: one line per asset, empty box lists explicit."""
    records = []
    for key in sorted(oracle):
        boxes = sorted(oracle[key], key=Annotation.box_sort_key)
        records.append({"asset": key, "boxes": [annotation_to_record(a) for a in boxes]})
    with open(path, "wb") as f:
        f.write(canonical.dump_lines(records))


def read_oracle(path) -> dict[str, list[Annotation]]:
    with open(path, "rb") as f:
        data = f.read()
    oracle: dict[str, list[Annotation]] = {}
    for record in canonical.load_lines(data):
        oracle[record["asset"]] = [annotation_from_record(b) for b in record["boxes"]]
    return oracle
