"""Synthetic workloads: data items, two-stage pipelines, and size binning.

A workload is a set of data items (single images or image pairs, sized in MB)
plus the two task templates that every item flows through. Item sizes are
drawn from a truncated normal distribution via rejection sampling so the
generator is exact rather than clamped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError

# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------


class ItemKind(str, Enum):
    SINGLE_IMAGE = "single_image"
    IMAGE_PAIR = "image_pair"


class Stage(str, Enum):
    FIRST = "stage1"
    SECOND = "stage2"


@dataclass(frozen=True)
class DataItem:
    """One unit of input data; size drives the performance model."""

    id: str
    size_mb: float
    kind: ItemKind = ItemKind.SINGLE_IMAGE

    def __post_init__(self):
        if not self.id:
            raise ConfigurationError("data item id must be non-empty")
        if not (self.size_mb > 0):
            raise ConfigurationError(f"item {self.id!r}: size_mb must be > 0, got {self.size_mb}")


@dataclass(frozen=True)
class TaskSpec:
    """Resource demands and model binding for one pipeline stage."""

    stage: Stage
    cpu_cores: int
    gpus: int
    mem_mb: float
    perf_model_id: str

    def __post_init__(self):
        if self.cpu_cores < 0 or self.gpus < 0 or self.mem_mb < 0:
            raise ConfigurationError("task demands must be non-negative")
        if self.cpu_cores + self.gpus < 1:
            raise ConfigurationError("a task must demand at least one CPU core or GPU")


@dataclass(frozen=True)
class WorkloadSpec:
    """Items plus the (stage1, stage2) task templates they flow through."""

    label: str
    items: tuple[DataItem, ...]
    pipeline: tuple[TaskSpec, TaskSpec]

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("workload item ids must be unique")
        stages = tuple(t.stage for t in self.pipeline)
        if stages != (Stage.FIRST, Stage.SECOND):
            raise ConfigurationError("pipeline must be exactly (stage1, stage2)")

    def task(self, stage: Stage) -> TaskSpec:
        return self.pipeline[0] if stage == Stage.FIRST else self.pipeline[1]

    @property
    def total_mb(self) -> float:
        return float(sum(it.size_mb for it in self.items))

    # -- JSON round-trip ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "items": [
                {"id": it.id, "size_mb": it.size_mb, "kind": it.kind.value} for it in self.items
            ],
            "pipeline": [
                {
                    "stage": t.stage.value,
                    "cpu_cores": t.cpu_cores,
                    "gpus": t.gpus,
                    "mem_mb": t.mem_mb,
                    "perf_model_id": t.perf_model_id,
                }
                for t in self.pipeline
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "WorkloadSpec":
        items = tuple(
            DataItem(id=d["id"], size_mb=d["size_mb"], kind=ItemKind(d["kind"]))
            for d in doc["items"]
        )
        pipeline = tuple(
            TaskSpec(
                stage=Stage(d["stage"]),
                cpu_cores=d["cpu_cores"],
                gpus=d["gpus"],
                mem_mb=d["mem_mb"],
                perf_model_id=d["perf_model_id"],
            )
            for d in doc["pipeline"]
        )
        return cls(label=doc["label"], items=items, pipeline=pipeline)  # type: ignore[arg-type]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "WorkloadSpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def generate_dataset(
    count: int,
    mean_mb: float,
    std_mb: float,
    min_mb: float,
    max_mb: float,
    seed: int,
    *,
    id_prefix: str = "img",
) -> list[DataItem]:
    """Draw `count` item sizes from a normal truncated to [min_mb, max_mb].

    Rejection sampling: out-of-range draws are discarded, not clamped, so the
    result is exactly truncated-normal distributed. Identical seed yields an
    identical item list.
    """
    if count < 0:
        raise ConfigurationError(f"count must be >= 0, got {count}")
    if not (min_mb > 0):
        raise ConfigurationError(f"min_mb must be > 0, got {min_mb}")
    if not (min_mb <= mean_mb <= max_mb):
        raise ConfigurationError(
            f"need min_mb <= mean_mb <= max_mb, got {min_mb} <= {mean_mb} <= {max_mb}"
        )
    if std_mb < 0:
        raise ConfigurationError(f"std_mb must be >= 0, got {std_mb}")

    rng = np.random.default_rng(seed)
    sizes: list[float] = []
    while len(sizes) < count:
        batch = rng.normal(mean_mb, std_mb, size=max(count, 64))
        kept = batch[(batch >= min_mb) & (batch <= max_mb)]
        sizes.extend(float(s) for s in kept[: count - len(sizes)])
    width = max(4, len(str(max(count - 1, 0))))
    return [
        DataItem(id=f"{id_prefix}{i:0{width}d}", size_mb=s, kind=ItemKind.SINGLE_IMAGE)
        for i, s in enumerate(sizes)
    ]


def generate_pairs(sources: list[DataItem], targets: list[DataItem]) -> list[DataItem]:
    """Cartesian product of two image sets; pair size is the summed size."""
    if not sources or not targets:
        raise ConfigurationError("generate_pairs needs non-empty source and target sets")
    pairs = []
    for s in sources:
        for t in targets:
            pairs.append(
                DataItem(id=f"{s.id}+{t.id}", size_mb=s.size_mb + t.size_mb, kind=ItemKind.IMAGE_PAIR)
            )
    return pairs


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------


@dataclass
class Bin:
    """Half-open size bin [lo, hi) holding (size, value) observation pairs."""

    index: int
    lo: float
    hi: float
    points: list[tuple[float, float]] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.points)

    def mean_size(self) -> float:
        return float(np.mean([p[0] for p in self.points]))

    def mean_value(self) -> float:
        return float(np.mean([p[1] for p in self.points]))

    def values(self) -> list[float]:
        return [p[1] for p in self.points]


def bin_items(
    points: list[tuple[float, float]], bin_width: float, origin: float
) -> list[Bin]:
    """Assign (size, value) points to fixed-width bins starting at `origin`.

    Bin k covers [origin + k*width, origin + (k+1)*width). Every point lands
    in exactly one bin; empty bins between occupied ones are retained so bin
    indices track absolute size ranges.
    """
    if bin_width <= 0:
        raise ConfigurationError(f"bin_width must be > 0, got {bin_width}")
    if not points:
        return []
    sizes = [p[0] for p in points]
    if min(sizes) < origin:
        raise ConfigurationError(
            f"point size {min(sizes)} below bin origin {origin}; lower the origin"
        )
    n_bins = int((max(sizes) - origin) // bin_width) + 1
    bins = [
        Bin(index=k, lo=origin + k * bin_width, hi=origin + (k + 1) * bin_width)
        for k in range(n_bins)
    ]
    for size, value in points:
        k = int((size - origin) // bin_width)
        bins[k].points.append((size, value))
    return bins
