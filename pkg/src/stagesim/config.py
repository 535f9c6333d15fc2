"""Experiment configuration: JSON schema, defaults, and bundled fixtures.

A config document fully determines a run:

    {
      "workload": {"use_case": "uc1", "count": 60, "dataset_seed": 101}
                  | {"use_case": "uc2", "sources": 20, "targets": 20, ...}
                  | {"items_file": "workload.json"},
      "cluster":  {"n_nodes": 4, "cpus_per_node": 32, "gpus_per_node": 2,
                   "mem_per_node_mb": 128000},
      "design":   "1" | "2" | "2a",
      "backend":  "sim" | "local",
      "seed":     7,
      "models":   {"profile_design": "1", "noise_sigma": 0.15, "floor_s": 0.1,
                   "stage1": {"alpha": ..., "beta": ...}, "stage2": {...}},
      "overheads": {"dataset_discovery_s": 1.0, "scheduler_latency_s": 1.5,
                    "queue_setup_s": 2.0, "distribute_s": null,
                    "task_bootstrap_s": 0.0, "task_teardown_s": 0.0},
      "queues":   {"wait_interval_s": 1.0},
      "node_speed_factors": null,
      "out_dir":  "results/run1"
    }

Explicit per-stage model parameters win over the bundled profile row selected
by `profile_design`. The dataset seed is separate from the run seed so a seed
sweep varies duration noise, not the workload itself. Fixture names accepted
anywhere a config path is: `uc1-desk` (60 single images at the large-image
statistics) and `uc2-desk` (20x20 image pairs at the small-image statistics).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .cluster import ClusterSpec
from .errors import ConfigurationError
from .eventlog import OverheadConfig
from .perf import MODEL_TABLE, PerfModel
from .queueproto import DEFAULT_WAIT_INTERVAL_S
from .workload import (
    Stage,
    TaskSpec,
    WorkloadSpec,
    generate_dataset,
    generate_pairs,
)

BACKENDS = ("sim", "local")

# Dataset shapes per use case. The pair use case states per-image bounds but
# pair-level mean/std, so per-image parameters are mean/2 and std/sqrt(2).
UC1_STATS = {"mean_mb": 1304.85, "std_mb": 512.68, "min_mb": 50.0, "max_mb": 2770.0}
UC2_IMAGE_STATS = {"mean_mb": 3.065, "std_mb": 1.2657, "min_mb": 1.5, "max_mb": 5.5}

# Per-task demands calibrated so feasibility yields the documented concurrency
# (large-image case: 3 stage-1 + 2 stage-2 per 32-core/2-GPU/128 GB node;
# pair case: 2 + 2). Memory is the binding constraint, cores and GPUs the rest.
DEFAULT_DEMANDS = {
    "uc1": {
        "stage1": {"cpu_cores": 1, "gpus": 0, "mem_mb": 40000.0},
        "stage2": {"cpu_cores": 0, "gpus": 1, "mem_mb": 2000.0},
    },
    "uc2": {
        "stage1": {"cpu_cores": 0, "gpus": 1, "mem_mb": 60000.0},
        "stage2": {"cpu_cores": 1, "gpus": 0, "mem_mb": 4000.0},
    },
}

DEFAULT_CLUSTER = {
    "n_nodes": 4,
    "cpus_per_node": 32,
    "gpus_per_node": 2,
    "mem_per_node_mb": 128000.0,
}

FIXTURES: dict[str, dict] = {
    "uc1-desk": {
        "workload": {"use_case": "uc1", "count": 60, "dataset_seed": 101},
        "cluster": dict(DEFAULT_CLUSTER),
        "design": "2",
        "backend": "sim",
        "seed": 7,
        # noise scaled down with the dataset: per-node aggregates over 15
        # items fluctuate like sigma/sqrt(15), so 0.05 here matches what the
        # full-size runs see per node at sigma 0.15
        "models": {"profile_design": "1", "noise_sigma": 0.05},
        "overheads": {
            "dataset_discovery_s": 1.0,
            "scheduler_latency_s": 1.5,
            "queue_setup_s": 2.0,
        },
        "queues": {"wait_interval_s": 1.0},
    },
    "uc2-desk": {
        "workload": {"use_case": "uc2", "sources": 20, "targets": 20, "dataset_seed": 202},
        "cluster": dict(DEFAULT_CLUSTER),
        "design": "2",
        "backend": "sim",
        "seed": 7,
        "models": {
            # stage 1 is the measured profile row; stage 2 is calibrated to the
            # measured 1.1 s mean at the 6.13 MB mean pair size
            "stage1": {"alpha": 0.93, "beta": 2.45},
            "stage2": {"alpha": 3.16e-2, "beta": 0.906},
            "noise_sigma": 0.15,
        },
        "overheads": {
            "dataset_discovery_s": 1.0,
            "scheduler_latency_s": 1.5,
            "queue_setup_s": 2.0,
        },
        "queues": {"wait_interval_s": 1.0},
    },
}


@dataclass
class ExperimentConfig:
    """A fully resolved experiment: everything an engine call needs."""

    workload: WorkloadSpec
    cluster: ClusterSpec
    design: str
    backend: str
    seed: int
    models: dict[Stage, PerfModel]
    overheads: OverheadConfig
    wait_interval_s: float
    node_speed_factors: list[float] | None
    out_dir: str | None
    raw: dict  # the resolved document, for provenance copies


def load_document(source) -> dict:
    """Fixture name or JSON file path -> raw config document (deep copy)."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    name = str(source)
    if name in FIXTURES:
        return copy.deepcopy(FIXTURES[name])
    path = Path(name)
    if not path.exists():
        raise ConfigurationError(
            f"config {name!r} is neither a bundled fixture {sorted(FIXTURES)} nor a file"
        )
    with open(path) as fh:
        return json.load(fh)


def resolve_config(doc: dict, **overrides) -> ExperimentConfig:
    """Validate a raw document (plus CLI overrides) into an ExperimentConfig."""
    doc = copy.deepcopy(doc)
    for key in ("design", "backend", "seed", "out_dir"):
        if overrides.get(key) is not None:
            doc[key] = overrides[key]

    design = doc.get("design")
    if design not in ("1", "2", "2a"):
        raise ConfigurationError(f"design must be one of 1/2/2a, got {design!r}")
    backend = doc.get("backend", "sim")
    if backend not in BACKENDS:
        raise ConfigurationError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if "seed" not in doc:
        raise ConfigurationError("config needs a seed (sim runs must be reproducible)")
    seed = int(doc["seed"])
    if seed < 0:
        raise ConfigurationError("seed must be >= 0")

    cluster = ClusterSpec.from_json({**DEFAULT_CLUSTER, **doc.get("cluster", {})})
    workload = _resolve_workload(doc.get("workload"), doc)
    models = _resolve_models(doc.get("models", {}), workload.label)

    oh_doc = doc.get("overheads", {})
    unknown = set(oh_doc) - set(OverheadConfig().to_json())
    if unknown:
        raise ConfigurationError(f"unknown overhead keys: {sorted(unknown)}")
    overheads = OverheadConfig.from_json(oh_doc)

    queues = doc.get("queues", {})
    wait_interval_s = float(queues.get("wait_interval_s", DEFAULT_WAIT_INTERVAL_S))

    speed = doc.get("node_speed_factors")
    if speed is not None:
        speed = [float(s) for s in speed]

    return ExperimentConfig(
        workload=workload,
        cluster=cluster,
        design=design,
        backend=backend,
        seed=seed,
        models=models,
        overheads=overheads,
        wait_interval_s=wait_interval_s,
        node_speed_factors=speed,
        out_dir=doc.get("out_dir"),
        raw=doc,
    )


def load_config(source, **overrides) -> ExperimentConfig:
    return resolve_config(load_document(source), **overrides)


# ---------------------------------------------------------------------------
# Section resolvers
# ---------------------------------------------------------------------------


def _demand(use_case: str, stage: str, section: dict) -> dict:
    base = dict(DEFAULT_DEMANDS[use_case][stage])
    base.update(section.get(f"{stage}_demand", {}))
    return base


def _resolve_workload(section, doc: dict) -> WorkloadSpec:
    if not section:
        raise ConfigurationError("config needs a workload section")
    if "items_file" in section:
        return WorkloadSpec.load(section["items_file"])

    use_case = section.get("use_case")
    if use_case not in ("uc1", "uc2"):
        raise ConfigurationError(f"workload.use_case must be uc1 or uc2, got {use_case!r}")
    dataset_seed = int(section.get("dataset_seed", 1234))

    if use_case == "uc1":
        stats = {**UC1_STATS, **{k: section[k] for k in UC1_STATS if k in section}}
        count = int(section.get("count", 60))
        items = generate_dataset(
            count, stats["mean_mb"], stats["std_mb"], stats["min_mb"], stats["max_mb"],
            dataset_seed,
        )
    else:
        stats = {**UC2_IMAGE_STATS, **{k: section[k] for k in UC2_IMAGE_STATS if k in section}}
        n_src = int(section.get("sources", 20))
        n_tgt = int(section.get("targets", 20))
        sources = generate_dataset(
            n_src, stats["mean_mb"], stats["std_mb"], stats["min_mb"], stats["max_mb"],
            dataset_seed, id_prefix="src",
        )
        targets = generate_dataset(
            n_tgt, stats["mean_mb"], stats["std_mb"], stats["min_mb"], stats["max_mb"],
            dataset_seed + 1, id_prefix="tgt",
        )
        items = generate_pairs(sources, targets)

    d1 = _demand(use_case, "stage1", section)
    d2 = _demand(use_case, "stage2", section)
    pipeline = (
        TaskSpec(stage=Stage.FIRST, perf_model_id="stage1", **d1),
        TaskSpec(stage=Stage.SECOND, perf_model_id="stage2", **d2),
    )
    return WorkloadSpec(label=use_case, items=tuple(items), pipeline=pipeline)


def _resolve_models(section: dict, use_case: str) -> dict[Stage, PerfModel]:
    noise = float(section.get("noise_sigma", 0.0))
    floor = float(section.get("floor_s", 0.1))
    profile_design = section.get("profile_design")
    models: dict[Stage, PerfModel] = {}
    for stage, key in ((Stage.FIRST, "stage1"), (Stage.SECOND, "stage2")):
        explicit = section.get(key)
        if explicit is not None:
            models[stage] = PerfModel(
                alpha=float(explicit["alpha"]),
                beta=float(explicit["beta"]),
                noise_sigma=float(explicit.get("noise_sigma", noise)),
                floor_s=float(explicit.get("floor_s", floor)),
            )
        elif profile_design is not None:
            row = MODEL_TABLE.get((profile_design, use_case, key))
            if row is None:
                raise ConfigurationError(
                    f"no bundled profile for design {profile_design!r} / {use_case!r} / {key}"
                )
            models[stage] = PerfModel(alpha=row[0], beta=row[1], noise_sigma=noise, floor_s=floor)
        else:
            raise ConfigurationError(
                f"models section must give {key!r} explicitly or set profile_design"
            )
    return models
