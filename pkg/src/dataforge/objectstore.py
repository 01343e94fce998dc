"""Content-addressed blob storage for image assets and model binaries.

Blobs live under ``objects/<first 2 hex>/<remaining 38 hex>`` as raw
bytes with no header. Writes go to a temporary file in the same tree and
are renamed into place, so a concurrent reader never observes a partial
blob and re-putting identical bytes is a harmless no-op.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .canonical import is_hex_key, sha1_hex
from .errors import CorruptBlob, IoFailure, NotFound

BLOB_KINDS = ("asset", "model")


@dataclass(frozen=True)
class BlobRef:
    key: str
    byte_size: int
    kind: str


class BlobStore:
    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / key[2:]

    def put_blob(self, data: bytes, kind: str = "asset") -> BlobRef:
        """Store *data* under its SHA-1; idempotent and atomic."""
        if kind not in BLOB_KINDS:
            raise ValueError(f"unknown blob kind: {kind!r}")
        key = sha1_hex(data)
        path = self._path(key)
        if not path.exists():
            _atomic_write(path, data)
        return BlobRef(key=key, byte_size=len(data), kind=kind)

    def get_blob(self, key: str) -> bytes:
        """Read a blob, re-verifying its hash on the way out."""
        if not is_hex_key(key):
            raise NotFound(key, "blob")
        path = self._path(key)
        if not path.exists():
            raise NotFound(key, "blob")
        data = path.read_bytes()
        if sha1_hex(data) != key:
            raise CorruptBlob(key)
        return data

    def has_blob(self, key: str) -> bool:
        if not is_hex_key(key):
            return False
        path = self._path(key)
        if not path.exists():
            return False
        return sha1_hex(path.read_bytes()) == key

    def total_bytes(self) -> int:
        """Sum of stored blob sizes (used by dedup tests)."""
        return sum(f.stat().st_size for f in self.root.glob("*/*") if f.is_file())


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
    except OSError as e:
        raise IoFailure(path, e) from e
