"""dataforge: a data-centric ML development engine.

Versioned datasets and models built through three primitive operations
(labeling, training, active-learning mining) over content-addressed
asset storage, incremental annotation packs and git-style project
branches, driven by a CLI, an HTTP service and pluggable operator
processes.
"""

from .model import (
    Annotation,
    Asset,
    Dataset,
    ModelArtifact,
    TaskMeta,
    filter_by_classes,
    merge_datasets,
    resolve_annotations,
    resolve_dataset,
    validate_annotation,
)
from .repo import Repository

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "Asset",
    "Dataset",
    "ModelArtifact",
    "Repository",
    "TaskMeta",
    "filter_by_classes",
    "merge_datasets",
    "resolve_annotations",
    "resolve_dataset",
    "validate_annotation",
]
