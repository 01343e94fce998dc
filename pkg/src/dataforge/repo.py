"""Version control of datasets and models.

Projects are branches; every operation is a commit; master aggregates
published data changes and never carries models. Commits are canonical
text objects stored under the SHA-1 of their bytes, so history is
append-only and verifiable. Commit manifests record an asset-list
digest instead of the key list itself, keeping commit size independent
of dataset size; the lists live as write-once metadata records shared
across versions.

All reads (checkout, log, graph) are lock-free; ref updates and commit
writes take the advisory repository lock, with compare-and-swap against
the expected head.
"""

from __future__ import annotations

import hashlib
import os
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock

from . import canonical
from .annotations import MetadataRecord, MetadataStore, PackStore
from .errors import (
    AlreadyInitialized,
    DanglingRef,
    DuplicateProject,
    NoRepository,
    NothingToPublish,
    NotFound,
    StaleHead,
    UnknownBase,
    UnknownCommit,
    UnknownProject,
)
from .model import Annotation, Asset, Dataset, ModelArtifact, TaskMeta, merge_datasets
from .objectstore import BlobStore, _atomic_write

REPO_DIRNAME = ".dataforge"
ENV_REPO = "DATAFORGE_REPO"
ENV_SEED = "DATAFORGE_SEED"
ROOT_MESSAGE = "init"


class Clock:
    def now(self) -> str:
        return datetime.now(timezone.utc).strftime(canonical.TIMESTAMP_FORMAT)


class FixedClock(Clock):
    """Deterministic clock: fixed epoch advancing one second per call."""

    def __init__(self, start: str = "2000-01-01T00:00:00.000000Z"):
        self._t = datetime.strptime(start, canonical.TIMESTAMP_FORMAT).replace(
            tzinfo=timezone.utc
        )
        self._calls = 0

    def now(self) -> str:
        from datetime import timedelta

        t = self._t + timedelta(seconds=self._calls)
        self._calls += 1
        return t.strftime(canonical.TIMESTAMP_FORMAT)


class IdGen:
    def new_id(self) -> str:
        return str(uuid.uuid4())


class SeededIdGen(IdGen):
    """UUIDv4-shaped ids derived from a seed, for reproducible runs."""

    def __init__(self, seed: str):
        self._seed = seed
        self._n = 0

    def new_id(self) -> str:
        self._n += 1
        digest = hashlib.sha1(f"{self._seed}:{self._n}".encode()).digest()
        return str(uuid.UUID(bytes=digest[:16], version=4))


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    assets_digest: str
    pack_refs: tuple[str, ...]
    created_by: str = ""

    def to_record(self) -> dict:
        return {
            "assets": self.assets_digest,
            "created_by": self.created_by,
            "name": self.name,
            "packs": list(self.pack_refs),
        }

    @classmethod
    def from_record(cls, record: dict) -> "DatasetManifest":
        return cls(
            name=record["name"],
            assets_digest=record["assets"],
            pack_refs=tuple(record["packs"]),
            created_by=record.get("created_by", ""),
        )


@dataclass(frozen=True)
class ModelManifest:
    key: str
    metrics: dict
    class_names: tuple[str, ...]
    task: str = ""

    def to_record(self) -> dict:
        return {
            "classes": list(self.class_names),
            "key": self.key,
            "metrics": dict(self.metrics),
            "task": self.task,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ModelManifest":
        return cls(
            key=record["key"],
            metrics=dict(record["metrics"]),
            class_names=tuple(record["classes"]),
            task=record.get("task", ""),
        )

    def to_artifact(self, model_id: str) -> ModelArtifact:
        return ModelArtifact(
            key=self.key,
            metrics=self.metrics,
            producing_task=self.task,
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class Commit:
    key: str
    parents: tuple[str, ...]
    datasets: dict[str, DatasetManifest]
    models: dict[str, ModelManifest]
    task: str | None
    message: str
    created_at: str


def _commit_record(parents, datasets, models, task, message, created_at) -> dict:
    return {
        "created_at": created_at,
        "datasets": {i: m.to_record() for i, m in sorted(datasets.items())},
        "message": message,
        "models": {i: m.to_record() for i, m in sorted(models.items())},
        "parents": list(parents),
        "task": task,
    }


@dataclass
class CheckoutState:
    """A historical repository state materialized purely from the stores."""

    commit: Commit
    datasets: dict[str, Dataset]
    annotations: dict[str, dict[str, list[Annotation]]]  # dataset id -> asset -> boxes
    models: dict[str, ModelArtifact]


@dataclass
class HistoryGraph:
    commits: list[dict]
    entities: list[dict]  # {id, kind: dataset|model, name?}
    derivations: list[dict]  # {src, dst, op, task}


class Repository:
    def __init__(self, root: Path, clock: Clock | None = None, ids: IdGen | None = None):
        self.root = Path(root)
        self.dir = self.root / REPO_DIRNAME
        self.blobs = BlobStore(self.dir / "objects")
        self.packs = PackStore(self.dir / "packs")
        self.meta = MetadataStore(self.dir / "meta")
        seed = os.environ.get(ENV_SEED)
        if clock is None:
            clock = FixedClock() if seed else Clock()
        if ids is None:
            ids = SeededIdGen(seed) if seed else IdGen()
        self.clock = clock
        self.ids = ids
        self.lock = FileLock(str(self.dir / "repo.lock"), timeout=30)

    # --- lifecycle -----------------------------------------------------

    @classmethod
    def init(cls, root: Path, clock=None, ids=None, config_extra=None) -> "Repository":
        root = Path(root)
        if (root / REPO_DIRNAME).exists():
            raise AlreadyInitialized(root)
        if root.exists() and not root.is_dir():
            raise AlreadyInitialized(root)
        repo = cls(root, clock=clock, ids=ids)
        for sub in ("objects", "packs", "meta/fixed", "meta/mutable", "commits",
                    "refs/projects", "tasks"):
            (repo.dir / sub).mkdir(parents=True, exist_ok=True)
        lines = ["format_version=1", "hash=sha1"]
        lines.extend(config_extra or [])
        _atomic_write(repo.dir / "config", ("\n".join(lines) + "\n").encode())
        root_key = repo._write_commit(
            parents=(), datasets={}, models={}, task=None,
            message=ROOT_MESSAGE, created_at=repo.clock.now(),
        )
        repo._write_ref("master", root_key)
        repo.set_current_project("master")
        return repo

    @classmethod
    def open(cls, start: Path | str | None = None, clock=None, ids=None) -> "Repository":
        """Resolve the repository root: explicit path, DATAFORGE_REPO, or
        the nearest ancestor of the cwd containing the repo directory."""
        if start is None:
            start = os.environ.get(ENV_REPO) or Path.cwd()
        candidate = Path(start).resolve()
        if (candidate / REPO_DIRNAME).is_dir():
            return cls(candidate, clock=clock, ids=ids)
        for parent in candidate.parents:
            if (parent / REPO_DIRNAME).is_dir():
                return cls(parent, clock=clock, ids=ids)
        raise NoRepository(start)

    def config(self) -> dict[str, str]:
        out = {}
        path = self.dir / "config"
        if path.exists():
            for line in path.read_text().splitlines():
                line = line.strip()
                if line and not line.startswith("#") and "=" in line:
                    k, _, v = line.partition("=")
                    out[k.strip()] = v.strip()
        return out

    def new_id(self) -> str:
        return self.ids.new_id()

    # --- refs ------------------------------------------------------------

    def _ref_path(self, name: str) -> Path:
        if name == "master":
            return self.dir / "refs" / "master"
        return self.dir / "refs" / "projects" / name

    def _write_ref(self, name: str, key: str) -> None:
        _atomic_write(self._ref_path(name), (key + "\n").encode())

    def head(self, name: str) -> str:
        path = self._ref_path(name)
        if not path.exists():
            raise UnknownProject(name)
        return path.read_text().strip()

    def project_names(self) -> list[str]:
        base = self.dir / "refs" / "projects"
        names = [f.name for f in base.iterdir()] if base.is_dir() else []
        return ["master"] + sorted(names)

    def has_project(self, name: str) -> bool:
        return self._ref_path(name).exists()

    def current_project(self) -> str:
        path = self.dir / "CURRENT"
        return path.read_text().strip() if path.exists() else "master"

    def set_current_project(self, name: str) -> None:
        _atomic_write(self.dir / "CURRENT", (name + "\n").encode())

    def create_project(self, name: str, base: str = "master"):
        """New branch whose head is *base* (a project name or commit key)."""
        if not name or "/" in name or name == "master":
            raise DuplicateProject(name)
        with self.lock:
            if self.has_project(name):
                raise DuplicateProject(name)
            if self.has_project(base):
                base_key = self.head(base)
            elif self._commit_path(base).exists():
                base_key = base
            else:
                raise UnknownBase(base)
            self._write_ref(name, base_key)
        return {"name": name, "head": base_key}

    # --- commits -----------------------------------------------------------

    def _commit_path(self, key: str) -> Path:
        return self.dir / "commits" / f"{key}.cjson"

    def _write_commit(self, parents, datasets, models, task, message, created_at) -> str:
        record = _commit_record(parents, datasets, models, task, message, created_at)
        data = canonical.dump_line(record)
        key = canonical.sha1_hex(data)
        path = self._commit_path(key)
        if not path.exists():
            _atomic_write(path, data)
        return key

    def read_commit(self, key: str) -> Commit:
        path = self._commit_path(key)
        if not path.exists():
            raise UnknownCommit(key)
        record = canonical.loads(path.read_bytes())
        return Commit(
            key=key,
            parents=tuple(record["parents"]),
            datasets={
                i: DatasetManifest.from_record(m) for i, m in record["datasets"].items()
            },
            models={i: ModelManifest.from_record(m) for i, m in record["models"].items()},
            task=record["task"],
            message=record["message"],
            created_at=record["created_at"],
        )

    def _check_manifest_refs(self, datasets, models) -> None:
        for manifest in datasets.values():
            if not self.meta.has(f"assetlist/{manifest.assets_digest}"):
                raise DanglingRef(manifest.assets_digest)
            for ref in manifest.pack_refs:
                if not self.packs.has_pack(ref):
                    raise DanglingRef(ref)
        for manifest in models.values():
            if not self.blobs.has_blob(manifest.key):
                raise DanglingRef(manifest.key)

    def commit(
        self,
        project: str,
        dataset_changes: dict[str, DatasetManifest | None],
        model_changes: dict[str, ModelManifest | None],
        task: str | None,
        message: str,
        expected_head: str | None = None,
    ) -> Commit:
        """Append a commit to *project*: unchanged manifests carry forward,
        ``None`` removes an entry. Fails with StaleHead if the head moved
        past *expected_head*."""
        with self.lock:
            head = self.head(project)
            if expected_head is not None and head != expected_head:
                raise StaleHead(project, expected_head, head)
            base = self.read_commit(head)
            datasets = dict(base.datasets)
            models = dict(base.models)
            for ds_id, manifest in dataset_changes.items():
                if manifest is None:
                    datasets.pop(ds_id, None)
                else:
                    datasets[ds_id] = manifest
            for model_id, manifest in model_changes.items():
                if manifest is None:
                    models.pop(model_id, None)
                else:
                    models[model_id] = manifest
            self._check_manifest_refs(datasets, models)
            key = self._write_commit(
                parents=(head,), datasets=datasets, models=models,
                task=task, message=message, created_at=self.clock.now(),
            )
            self._write_ref(project, key)
            return self.read_commit(key)

    # --- asset lists & asset attributes ---------------------------------

    def put_asset_list(self, keys) -> str:
        keys = list(keys)
        digest = canonical.key_of(keys)
        self.meta.put(MetadataRecord(f"assetlist/{digest}", "fixed", {"keys": keys}))
        return digest

    def get_asset_list(self, digest: str) -> tuple[str, ...]:
        return tuple(self.meta.get(f"assetlist/{digest}").body["keys"])

    def save_asset(self, asset: Asset, filename: str = "") -> None:
        self.meta.put(
            MetadataRecord(
                f"asset/{asset.key}",
                "fixed",
                {
                    "byte_size": asset.byte_size,
                    "filename": filename,
                    "format": asset.format,
                    "height": asset.height,
                    "width": asset.width,
                },
            )
        )
        if asset.keywords:
            self.add_keywords(asset.key, asset.keywords)

    def add_keywords(self, asset_key: str, keywords) -> None:
        merged = set(self.keywords_of(asset_key))
        merged.update(k.lower() for k in keywords)
        self.meta.put(
            MetadataRecord(f"keywords/{asset_key}", "mutable", {"keywords": sorted(merged)})
        )

    def keywords_of(self, asset_key: str) -> frozenset[str]:
        try:
            return frozenset(self.meta.get(f"keywords/{asset_key}").body["keywords"])
        except NotFound:
            return frozenset()

    def load_asset(self, key: str) -> Asset:
        body = self.meta.get(f"asset/{key}").body
        return Asset(
            key=key,
            width=body["width"],
            height=body["height"],
            format=body["format"],
            byte_size=body["byte_size"],
            keywords=self.keywords_of(key),
        )

    # --- task records ----------------------------------------------------

    def save_task(self, task: TaskMeta) -> None:
        self.meta.put(
            MetadataRecord(
                f"task/{task.id}",
                "mutable",
                {
                    "created_at": task.created_at,
                    "error_message": task.error_message,
                    "id": task.id,
                    "inputs": list(task.inputs),
                    "op_kind": task.op_kind,
                    "outputs": list(task.outputs),
                    "params": task.params,
                    "state": task.state,
                },
            )
        )

    def load_task(self, task_id: str) -> TaskMeta:
        body = self.meta.get(f"task/{task_id}").body
        return TaskMeta(
            id=body["id"],
            op_kind=body["op_kind"],
            params=body["params"],
            inputs=list(body["inputs"]),
            outputs=list(body["outputs"]),
            state=body["state"],
            created_at=body["created_at"],
            error_message=body["error_message"],
        )

    def task_ids(self) -> list[str]:
        return [k.split("/", 1)[1] for k in self.meta.keys("task/")]

    # --- materialization --------------------------------------------------

    def dataset_from_manifest(self, ds_id: str, manifest: DatasetManifest) -> Dataset:
        return Dataset(
            id=ds_id,
            name=manifest.name,
            asset_keys=self.get_asset_list(manifest.assets_digest),
            pack_refs=manifest.pack_refs,
            created_by=manifest.created_by,
        )

    def checkout(self, commit_key: str) -> CheckoutState:
        """Rebuild the full state at a commit from stored packs and lists;
        never mutates any ref."""
        commit = self.read_commit(commit_key)
        loader = self.packs.loader()
        datasets: dict[str, Dataset] = {}
        annotations: dict[str, dict[str, list[Annotation]]] = {}
        for ds_id, manifest in commit.datasets.items():
            ds = self.dataset_from_manifest(ds_id, manifest)
            datasets[ds_id] = ds
            from .model import resolve_dataset

            annotations[ds_id] = resolve_dataset(ds, loader)
        models = {i: m.to_artifact(i) for i, m in commit.models.items()}
        return CheckoutState(commit=commit, datasets=datasets, annotations=annotations, models=models)

    def find_dataset(self, ds_id: str, project: str | None = None):
        """Locate a dataset id in branch heads; master is searched first so
        the aggregated version wins when present on several branches."""
        for name in self._search_order(project):
            commit = self.read_commit(self.head(name))
            if ds_id in commit.datasets:
                return self.dataset_from_manifest(ds_id, commit.datasets[ds_id]), name
        return None, None

    def find_model(self, model_id: str, project: str | None = None):
        for name in self._search_order(project):
            commit = self.read_commit(self.head(name))
            if model_id in commit.models:
                return commit.models[model_id], name
        return None, None

    def _search_order(self, project: str | None) -> list[str]:
        if project is not None:
            if not self.has_project(project):
                raise UnknownProject(project)
            return [project]
        return self.project_names()

    # --- log / graph -------------------------------------------------------

    def _walk(self, start_keys) -> list[Commit]:
        seen: set[str] = set()
        frontier = list(start_keys)
        commits = []
        while frontier:
            key = frontier.pop()
            if key in seen:
                continue
            seen.add(key)
            commit = self.read_commit(key)
            commits.append(commit)
            frontier.extend(commit.parents)
        commits.sort(key=lambda c: (c.created_at, c.key), reverse=True)
        return commits

    def log(self, name_or_key: str) -> list[Commit]:
        if self.has_project(name_or_key):
            start = self.head(name_or_key)
        elif self._commit_path(name_or_key).exists():
            start = name_or_key
        else:
            raise UnknownProject(name_or_key)
        return self._walk([start])

    def history_graph(self, scope: str = "all") -> HistoryGraph:
        """Commit DAG plus dataset/model derivation edges reconstructed
        solely from task inputs/outputs."""
        if scope == "all":
            heads = [self.head(p) for p in self.project_names()]
        else:
            heads = [self.head(scope)]
        commits = self._walk(heads)
        entity_kind: dict[str, str] = {}
        entity_name: dict[str, str] = {}
        for c in commits:
            for ds_id, manifest in c.datasets.items():
                entity_kind[ds_id] = "dataset"
                entity_name[ds_id] = manifest.name
            for model_id in c.models:
                entity_kind.setdefault(model_id, "model")
        nodes = []
        derivations = []
        seen_tasks: set[str] = set()
        for c in commits:
            summary = None
            if c.task:
                try:
                    t = self.load_task(c.task)
                    summary = {"id": t.id, "op_kind": t.op_kind, "state": t.state}
                    if t.id not in seen_tasks:
                        seen_tasks.add(t.id)
                        for src in t.inputs:
                            for dst in t.outputs:
                                derivations.append(
                                    {"src": src, "dst": dst, "op": t.op_kind, "task": t.id}
                                )
                except NotFound:
                    summary = {"id": c.task, "op_kind": None, "state": None}
            nodes.append(
                {
                    "key": c.key,
                    "parents": list(c.parents),
                    "message": c.message,
                    "created_at": c.created_at,
                    "task": summary,
                }
            )
        entities = [
            {"id": eid, "kind": kind, "name": entity_name.get(eid)}
            for eid, kind in sorted(entity_kind.items())
        ]
        derivations.sort(key=lambda d: (d["task"], d["src"], d["dst"]))
        return HistoryGraph(commits=nodes, entities=entities, derivations=derivations)

    # --- publish -----------------------------------------------------------

    def _is_ancestor(self, maybe_ancestor: str, start: str) -> bool:
        seen = set()
        frontier = [start]
        while frontier:
            key = frontier.pop()
            if key == maybe_ancestor:
                return True
            if key in seen:
                continue
            seen.add(key)
            frontier.extend(self.read_commit(key).parents)
        return False

    def publish_to_master(self, project: str, task: str | None = None,
                          message: str | None = None) -> Commit:
        """Merge a project's data changes into master.

        Creates a merge commit with parents (master head, project head).
        Only datasets cross over: models never. A dataset id present on
        both sides with differing manifests is reconciled by the dataset
        merge rule with the project's version as primary, keeping its id.
        Master-only datasets are retained (aggregation, so project-side
        deletions do not propagate).
        """
        if not self.has_project(project):
            raise UnknownProject(project)
        with self.lock:
            master_head = self.head("master")
            project_head = self.head(project)
            if self._is_ancestor(project_head, master_head):
                raise NothingToPublish(project)
            master_commit = self.read_commit(master_head)
            project_commit = self.read_commit(project_head)
            datasets = dict(master_commit.datasets)
            loader = self.packs.loader()
            for ds_id, manifest in project_commit.datasets.items():
                if ds_id not in datasets or datasets[ds_id] == manifest:
                    datasets[ds_id] = manifest
                    continue
                ours = self.dataset_from_manifest(ds_id, datasets[ds_id])
                theirs = self.dataset_from_manifest(ds_id, manifest)
                merged, resolved = merge_datasets(theirs, [ours], loader, new_id=ds_id)
                nonempty = {k: v for k, v in resolved.items() if v}
                pack_refs = ()
                if nonempty:
                    pack_refs = (self.packs.write_pack(nonempty),)
                datasets[ds_id] = DatasetManifest(
                    name=merged.name,
                    assets_digest=self.put_asset_list(merged.asset_keys),
                    pack_refs=pack_refs,
                    created_by=manifest.created_by,
                )
            key = self._write_commit(
                parents=(master_head, project_head),
                datasets=datasets,
                models={},
                task=task,
                message=message or f"publish {project}",
                created_at=self.clock.now(),
            )
            self._write_ref("master", key)
            return self.read_commit(key)

    # --- integrity ---------------------------------------------------------

    def fsck(self) -> list[str]:
        """Re-hash every commit and pack file against its name."""
        problems = []
        for f in (self.dir / "commits").glob("*.cjson"):
            if canonical.sha1_hex(f.read_bytes()) != f.stem:
                problems.append(f"commit {f.name} does not match its key")
        for f in (self.dir / "packs").glob("*.cjsonl"):
            if canonical.sha1_hex(f.read_bytes()) != f.stem:
                problems.append(f"pack {f.name} does not match its key")
        return problems

    def store_bytes(self) -> int:
        """Total bytes of all files under the repo directory (growth probe)."""
        total = 0
        for base, _dirs, files in os.walk(self.dir):
            if Path(base).name == "tasks":
                continue
            for name in files:
                if name == "repo.lock":
                    continue
                total += (Path(base) / name).stat().st_size
        return total
