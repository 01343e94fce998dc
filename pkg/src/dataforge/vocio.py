"""Dataset ingestion and bit-faithful PASCAL VOC import/export.

Sources are a local VOC directory, a .zip/.tar.gz archive of one, or an
http(s) URI pointing at such an archive. The VOC layout is
``JPEGImages/`` plus ``Annotations/`` with stem-matched XML files;
images without an XML import as unannotated assets (that is how
unlabeled mining pools enter the system), an XML without its image is a
per-file failure. Coordinates are kept in VOC's 1-based inclusive
integer convention end to end so import -> export round-trips bit-exact.
"""

from __future__ import annotations

import io
import tarfile
import tempfile
import urllib.request
import zipfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import (
    DataforgeError,
    InvalidAnnotation,
    MalformedXml,
    MissingField,
    OutOfRangeBox,
    PartialImport,
    SourceUnreachable,
    VocLayoutError,
)
from .model import Annotation, Asset, Dataset, filter_by_classes, resolve_dataset, validate_annotation

IMPORT_MODES = ("upload", "public_copy", "uri")
_IMAGE_SUFFIXES = {".jpg": "jpeg", ".jpeg": "jpeg", ".png": "png"}
_FORMAT_EXT = {"jpeg": "jpg", "png": "png"}


@dataclass(frozen=True)
class ImportSource:
    mode: str  # upload | public_copy | uri
    location: str
    name: str
    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in IMPORT_MODES:
            raise ValueError(f"unknown import mode: {self.mode!r}")


@dataclass(frozen=True)
class BoxFragment:
    """A parsed <object>: class name plus bndbox, not yet tied to an asset."""

    class_name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int


@dataclass
class ParsedImage:
    filename: str
    data: bytes
    width: int
    height: int
    format: str
    boxes: list[BoxFragment] = field(default_factory=list)


def _int_text(element, path: str) -> int:
    node = element.find(path)
    if node is None or node.text is None:
        raise MissingField(path)
    try:
        return int(float(node.text.strip()))
    except ValueError as e:
        raise MalformedXml(f"non-numeric {path}: {node.text!r}") from e


def parse_voc_xml(xml_bytes: bytes) -> tuple[dict, list[BoxFragment]]:
    """Extract image size and object boxes from one VOC annotation file.

    Unknown elements are ignored; zero <object> elements is a valid,
    empty annotation. Degenerate or out-of-image boxes raise
    OutOfRangeBox.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as e:
        raise MalformedXml(str(e)) from e
    width = _int_text(root, "size/width")
    height = _int_text(root, "size/height")
    filename_node = root.find("filename")
    attrs = {
        "width": width,
        "height": height,
        "filename": filename_node.text.strip() if filename_node is not None and filename_node.text else None,
    }
    boxes = []
    for obj in root.findall("object"):
        name_node = obj.find("name")
        if name_node is None or not (name_node.text or "").strip():
            raise MissingField("object/name")
        name = name_node.text.strip()
        xmin = _int_text(obj, "bndbox/xmin")
        ymin = _int_text(obj, "bndbox/ymin")
        xmax = _int_text(obj, "bndbox/xmax")
        ymax = _int_text(obj, "bndbox/ymax")
        if xmin < 1 or ymin < 1 or xmin >= xmax or ymin >= ymax:
            raise OutOfRangeBox(f"degenerate box ({xmin},{ymin},{xmax},{ymax}) for {name}")
        if xmax > width or ymax > height:
            raise OutOfRangeBox(
                f"box ({xmin},{ymin},{xmax},{ymax}) exceeds image {width}x{height}"
            )
        boxes.append(BoxFragment(name, xmin, ymin, xmax, ymax))
    return attrs, boxes


def render_voc_xml(asset: Asset, annotations, filename: str | None = None) -> bytes:
    """Deterministic VOC XML: fixed element order, objects in canonical
    box order, UTF-8, LF. parse_voc_xml inverts it exactly."""
    boxes = sorted(annotations, key=Annotation.box_sort_key)
    for a in boxes:
        problems = validate_annotation(a, asset)
        if problems:
            raise InvalidAnnotation("; ".join(problems))
    if filename is None:
        filename = f"{asset.key}.{_FORMAT_EXT[asset.format]}"
    lines = [
        "<annotation>",
        "\t<folder>JPEGImages</folder>",
        f"\t<filename>{escape(filename)}</filename>",
        "\t<size>",
        f"\t\t<width>{asset.width}</width>",
        f"\t\t<height>{asset.height}</height>",
        "\t\t<depth>3</depth>",
        "\t</size>",
    ]
    for a in boxes:
        lines.extend(
            [
                "\t<object>",
                f"\t\t<name>{escape(a.class_name)}</name>",
                "\t\t<bndbox>",
                f"\t\t\t<xmin>{a.xmin}</xmin>",
                f"\t\t\t<ymin>{a.ymin}</ymin>",
                f"\t\t\t<xmax>{a.xmax}</xmax>",
                f"\t\t\t<ymax>{a.ymax}</ymax>",
                "\t\t</bndbox>",
                "\t</object>",
            ]
        )
    lines.append("</annotation>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def decode_image(data: bytes) -> tuple[int, int, str]:
    """(width, height, format) from image bytes via the decoder, not the
    file extension."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = (img.format or "").lower()
            if fmt not in ("jpeg", "png"):
                raise VocLayoutError(f"unsupported image format: {img.format}")
            return img.width, img.height, fmt
    except UnidentifiedImageError as e:
        raise VocLayoutError(f"undecodable image: {e}") from e


def load_voc_tree(root: Path) -> list[ParsedImage]:
    """Parse a VOC directory into memory, validating everything before
    anything is stored. Any per-file failure aborts the whole import."""
    root = Path(root)
    images_dir = root / "JPEGImages"
    annotations_dir = root / "Annotations"
    if not images_dir.is_dir():
        raise VocLayoutError(f"missing JPEGImages/ under {root}")
    xml_by_stem = {}
    if annotations_dir.is_dir():
        xml_by_stem = {f.stem: f for f in sorted(annotations_dir.glob("*.xml"))}
    image_files = sorted(
        f for f in images_dir.iterdir() if f.suffix.lower() in _IMAGE_SUFFIXES
    )
    if not image_files and not xml_by_stem:
        raise VocLayoutError(f"no images found under {images_dir}")

    parsed: list[ParsedImage] = []
    failures: list[tuple[str, str]] = []
    matched_stems = set()
    for image_path in image_files:
        try:
            data = image_path.read_bytes()
            width, height, fmt = decode_image(data)
            item = ParsedImage(
                filename=image_path.name, data=data, width=width, height=height, format=fmt
            )
            xml_path = xml_by_stem.get(image_path.stem)
            if xml_path is not None:
                matched_stems.add(image_path.stem)
                attrs, boxes = parse_voc_xml(xml_path.read_bytes())
                if (attrs["width"], attrs["height"]) != (width, height):
                    raise VocLayoutError(
                        f"annotation says {attrs['width']}x{attrs['height']}, "
                        f"image decodes to {width}x{height}"
                    )
                item.boxes = boxes
            parsed.append(item)
        except (OSError, DataforgeError) as e:
            failures.append((image_path.name, str(e)))
    for stem, xml_path in xml_by_stem.items():
        if stem not in matched_stems:
            failures.append((xml_path.name, "annotation has no matching image"))
    if failures:
        raise PartialImport(failures)
    return parsed


def _extract_archive(data: bytes, workdir: Path) -> Path:
    if data[:4] == b"PK\x03\x04":
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            zf.extractall(workdir)
    elif data[:2] == b"\x1f\x8b":
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tf:
            tf.extractall(workdir)
    else:
        raise VocLayoutError("archive is neither .zip nor .tar.gz")
    return _find_voc_root(workdir)


def _find_voc_root(base: Path) -> Path:
    if (base / "JPEGImages").is_dir():
        return base
    candidates = [d for d in sorted(base.iterdir()) if (d / "JPEGImages").is_dir()]
    if len(candidates) == 1:
        return candidates[0]
    raise VocLayoutError(f"cannot locate a VOC layout under {base}")


def resolve_source_tree(source: ImportSource, scratch: Path) -> Path:
    """Materialize the source as a local VOC directory (downloading and
    unpacking archives into *scratch* as needed)."""
    location = source.location
    if source.mode == "uri" and location.startswith(("http://", "https://")):
        try:
            with urllib.request.urlopen(location, timeout=60) as resp:
                data = resp.read()
        except OSError as e:
            raise SourceUnreachable(f"cannot fetch {location}: {e}") from e
        return _extract_archive(data, scratch)
    if location.startswith("file://"):
        location = location[len("file://"):]
    path = Path(location)
    if not path.exists():
        raise SourceUnreachable(f"no such path: {location}")
    if path.is_file():
        return _extract_archive(path.read_bytes(), scratch)
    return path


def load_import_plan(source: ImportSource) -> list[ParsedImage]:
    with tempfile.TemporaryDirectory(prefix="dataforge-import-") as scratch:
        tree = resolve_source_tree(source, Path(scratch))
        return load_voc_tree(tree)


def export_voc(repo, dataset: Dataset, destination: Path, classes=None) -> list[str]:
    """Write a dataset back out as a VOC tree, one XML per asset.

    Exported stems are asset SHA-1 keys (content is the identity; the
    original filename only survives as import metadata). With *classes*
    the boxes are filtered first. Returns the relative paths written.
    """
    destination = Path(destination)
    if destination.exists() and any(destination.iterdir()):
        raise VocLayoutError(f"export destination not empty: {destination}")
    images_dir = destination / "JPEGImages"
    annotations_dir = destination / "Annotations"
    images_dir.mkdir(parents=True, exist_ok=True)
    annotations_dir.mkdir(parents=True, exist_ok=True)
    loader = repo.packs.loader()
    if classes:
        resolved = filter_by_classes(dataset, classes, loader)
    else:
        resolved = resolve_dataset(dataset, loader)
    written = []
    for key in dataset.asset_keys:
        asset = repo.load_asset(key)
        data = repo.blobs.get_blob(key)
        image_name = f"{key}.{_FORMAT_EXT[asset.format]}"
        (images_dir / image_name).write_bytes(data)
        xml_bytes = render_voc_xml(asset, resolved.get(key, []))
        (annotations_dir / f"{key}.xml").write_bytes(xml_bytes)
        written.append(f"JPEGImages/{image_name}")
        written.append(f"Annotations/{key}.xml")
    return written
