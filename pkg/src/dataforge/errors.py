"""Exception hierarchy.

``DataforgeError`` is the base for everything a caller can provoke; the
CLI maps it to exit code 1 and the HTTP layer to a 4xx/5xx response.
Unexpected exceptions are internal failures (CLI exit code 2).
"""

from __future__ import annotations


class DataforgeError(Exception):
    """Base class for user-addressable failures."""


class IoFailure(DataforgeError):
    def __init__(self, path, cause):
        super().__init__(f"i/o failure on {path}: {cause}")
        self.path = str(path)
        self.cause = cause


# --- storage -----------------------------------------------------------

class NotFound(DataforgeError):
    def __init__(self, key: str, what: str = "object"):
        super().__init__(f"{what} not found: {key}")
        self.key = key


class CorruptBlob(DataforgeError):
    def __init__(self, key: str):
        super().__init__(f"blob {key} failed integrity re-hash")
        self.key = key


class CorruptPack(DataforgeError):
    def __init__(self, key: str, detail: str = "integrity re-hash failed"):
        super().__init__(f"pack {key}: {detail}")
        self.key = key


class FixedRecordConflict(DataforgeError):
    def __init__(self, key: str):
        super().__init__(f"fixed metadata record {key} rewritten with a different body")
        self.key = key


class InvalidAnnotation(DataforgeError):
    pass


# --- dataset algebra ---------------------------------------------------

class MissingPack(DataforgeError):
    def __init__(self, key: str):
        super().__init__(f"annotation pack not found: {key}")
        self.key = key


class MissingDataset(DataforgeError):
    def __init__(self, dataset_id: str):
        super().__init__(f"dataset not found: {dataset_id}")
        self.dataset_id = dataset_id


class UnknownDataset(MissingDataset):
    pass


class EmptyMergeInput(DataforgeError):
    def __init__(self):
        super().__init__("merge requires at least one secondary dataset")


class EmptyClassSet(DataforgeError):
    def __init__(self):
        super().__init__("class filter requires a non-empty class set")


# --- version control ---------------------------------------------------

class AlreadyInitialized(DataforgeError):
    def __init__(self, root):
        super().__init__(f"repository already initialized at {root}")


class NoRepository(DataforgeError):
    def __init__(self, start):
        super().__init__(f"no repository found at or above {start}")


class DuplicateProject(DataforgeError):
    def __init__(self, name: str):
        super().__init__(f"project already exists: {name}")
        self.name = name


class UnknownProject(DataforgeError):
    def __init__(self, name: str):
        super().__init__(f"unknown project: {name}")
        self.name = name


class UnknownBase(DataforgeError):
    def __init__(self, base: str):
        super().__init__(f"unknown base project or commit: {base}")


class UnknownCommit(DataforgeError):
    def __init__(self, key: str):
        super().__init__(f"unknown commit: {key}")
        self.key = key


class StaleHead(DataforgeError):
    def __init__(self, project: str, expected: str, actual: str):
        super().__init__(
            f"head of {project} moved (expected {expected[:8]}, found {actual[:8]})"
        )


class DanglingRef(DataforgeError):
    def __init__(self, key: str):
        super().__init__(f"commit references unstored key: {key}")
        self.key = key


class NothingToPublish(DataforgeError):
    def __init__(self, project: str):
        super().__init__(f"project {project} has no data changes to publish")


# --- import/export -----------------------------------------------------

class MalformedXml(DataforgeError):
    pass


class MissingField(DataforgeError):
    def __init__(self, path: str):
        super().__init__(f"missing field: {path}")
        self.path = path


class OutOfRangeBox(DataforgeError):
    pass


class SourceUnreachable(DataforgeError):
    pass


class VocLayoutError(DataforgeError):
    pass


class PartialImport(DataforgeError):
    def __init__(self, failures: list[tuple[str, str]]):
        lines = "; ".join(f"{name}: {reason}" for name, reason in failures)
        super().__init__(f"import aborted, {len(failures)} file(s) failed: {lines}")
        self.failures = failures


# --- operators ---------------------------------------------------------

class OperatorCrashed(DataforgeError):
    def __init__(self, exit_code: int, stderr_tail: str):
        super().__init__(f"operator exited with code {exit_code}: {stderr_tail.strip()}")
        self.exit_code = exit_code
        self.stderr_tail = stderr_tail


class OperatorTimeout(DataforgeError):
    def __init__(self, timeout: float):
        super().__init__(f"operator exceeded {timeout}s timeout")


class MalformedOutput(DataforgeError):
    pass


class DegenerateClassCount(DataforgeError):
    def __init__(self, count: int):
        super().__init__(f"entropy scoring needs at least 2 classes, got {count}")


class EmptyPool(DataforgeError):
    def __init__(self):
        super().__init__("mining candidate pool is empty")


class NoLabels(DataforgeError):
    def __init__(self):
        super().__init__("training requires at least one annotated asset")


class UnknownModelFormat(DataforgeError):
    pass


class OracleMiss(DataforgeError):
    def __init__(self, asset_key: str):
        super().__init__(f"labeling oracle has no entry for asset {asset_key}")
        self.asset_key = asset_key


# --- tasks / service ---------------------------------------------------

class InvalidTransition(DataforgeError):
    def __init__(self, current: str, new: str):
        super().__init__(f"illegal task transition {current} -> {new}")


class SchemaViolation(DataforgeError):
    pass


class Unauthenticated(DataforgeError):
    def __init__(self, detail: str = "missing or invalid token"):
        super().__init__(detail)


class Forbidden(DataforgeError):
    def __init__(self, detail: str):
        super().__init__(detail)


class UndecodableImage(DataforgeError):
    pass
