"""Deterministic synthetic fixtures: tiny PNGs, VOC trees and oracles.

Everything is derived from a seed so the same spec always produces a
byte-identical tree. No binary fixtures live in the repository: the
PNGs are written by a minimal encoder (solid color with the asset index
embedded in the first pixel so every image hashes uniquely).
"""

from __future__ import annotations

import random
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from . import canonical
from .model import Annotation, Asset
from .operators.mocks import write_oracle
from .vocio import render_voc_xml

DEFAULT_CLASSES = ("person", "helmet", "vest")


@dataclass(frozen=True)
class FixtureSpec:
    seed: int
    n_assets: int
    classes: tuple[str, ...] = DEFAULT_CLASSES
    boxes_per_asset: tuple[int, int] = (0, 3)  # inclusive range

    def __post_init__(self):
        if self.n_assets < 1:
            raise ValueError("n_assets must be >= 1")
        if not self.classes:
            raise ValueError("classes must be non-empty")
        lo, hi = self.boxes_per_asset
        if lo < 0 or hi < lo:
            raise ValueError("boxes_per_asset must be a non-empty range")


def write_png(width: int, height: int, rgb: tuple[int, int, int],
              first_pixel: tuple[int, int, int] | None = None) -> bytes:
    """Minimal deterministic PNG: 8-bit RGB, solid *rgb*, optional
    distinct first pixel."""

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    row = bytearray(b"\x00" + bytes(rgb) * width)
    raw = bytearray()
    for y in range(height):
        if y == 0 and first_pixel is not None:
            first_row = bytearray(row)
            first_row[1:4] = bytes(first_pixel)
            raw += first_row
        else:
            raw += row
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(bytes(raw), 6))
        + chunk(b"IEND", b"")
    )


@dataclass
class FixtureTree:
    root: Path
    asset_keys: list[str]  # in generation order
    oracle: dict[str, list[Annotation]]  # asset key -> ground-truth boxes
    oracle_path: Path


def _random_box(rng: random.Random, width: int, height: int, class_name: str,
                asset_key: str) -> Annotation:
    xmin = rng.randint(1, width - 1)
    xmax = rng.randint(xmin + 1, width)
    ymin = rng.randint(1, height - 1)
    ymax = rng.randint(ymin + 1, height)
    return Annotation(
        asset_key=asset_key, class_name=class_name,
        xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax,
        score=None, source_task="oracle",
    )


def generate_fixture(spec: FixtureSpec, dest: Path, with_xml: bool = True) -> FixtureTree:
    """Write a VOC tree under *dest* plus an ``oracle.cjsonl`` ground-truth
    file next to it. With ``with_xml=False`` only the images are written
    (an unlabeled pool) while the oracle still covers every asset."""
    dest = Path(dest)
    images_dir = dest / "JPEGImages"
    annotations_dir = dest / "Annotations"
    images_dir.mkdir(parents=True, exist_ok=True)
    if with_xml:
        annotations_dir.mkdir(parents=True, exist_ok=True)

    rng = random.Random(spec.seed)
    lo, hi = spec.boxes_per_asset
    asset_keys: list[str] = []
    oracle: dict[str, list[Annotation]] = {}
    for i in range(spec.n_assets):
        width = rng.randint(16, 64)
        height = rng.randint(16, 64)
        color = (rng.randint(0, 255), rng.randint(0, 255), rng.randint(0, 255))
        marker = (i % 256, (i // 256) % 256, (i // 65536) % 256)
        data = write_png(width, height, color, first_pixel=marker)
        key = canonical.sha1_hex(data)
        stem = f"img_{i:05d}"
        (images_dir / f"{stem}.png").write_bytes(data)
        asset = Asset(key=key, width=width, height=height, format="png", byte_size=len(data))
        boxes = [
            _random_box(rng, width, height, rng.choice(spec.classes), key)
            for _ in range(rng.randint(lo, hi))
        ]
        oracle[key] = boxes
        asset_keys.append(key)
        if with_xml:
            xml = render_voc_xml(asset, boxes, filename=f"{stem}.png")
            (annotations_dir / f"{stem}.xml").write_bytes(xml)

    oracle_path = dest / "oracle.cjsonl"
    write_oracle(oracle_path, oracle)
    return FixtureTree(root=dest, asset_keys=asset_keys, oracle=oracle, oracle_path=oracle_path)


def tree_digest(root: Path) -> str:
    """Order-independent content digest of a directory tree."""
    root = Path(root)
    entries = []
    for path in sorted(root.rglob("*")):
        if path.is_file():
            entries.append(
                f"{path.relative_to(root)}:{canonical.sha1_hex(path.read_bytes())}"
            )
    return canonical.sha1_hex("\n".join(entries).encode())
