from __future__ import annotations

import pytest

from stagesim.cluster import ClusterSpec
from stagesim.eventlog import OverheadConfig
from stagesim.perf import PerfModel
from stagesim.workload import DataItem, ItemKind, Stage, TaskSpec, WorkloadSpec

# demands that give 3 stage-1 + 2 stage-2 workers on a 32-core/2-GPU/128 GB node
LARGE_IMAGE_PIPELINE = (
    TaskSpec(stage=Stage.FIRST, cpu_cores=1, gpus=0, mem_mb=40000.0, perf_model_id="stage1"),
    TaskSpec(stage=Stage.SECOND, cpu_cores=1, gpus=1, mem_mb=2000.0, perf_model_id="stage2"),
)

# demands that give 2 + 2 on the same node (stage 1 on GPUs)
PAIR_PIPELINE = (
    TaskSpec(stage=Stage.FIRST, cpu_cores=1, gpus=1, mem_mb=60000.0, perf_model_id="stage1"),
    TaskSpec(stage=Stage.SECOND, cpu_cores=1, gpus=0, mem_mb=4000.0, perf_model_id="stage2"),
)


def make_items(sizes, kind=ItemKind.SINGLE_IMAGE, prefix="it"):
    return tuple(
        DataItem(id=f"{prefix}{i:03d}", size_mb=float(s), kind=kind)
        for i, s in enumerate(sizes)
    )


def make_workload(sizes, pipeline=LARGE_IMAGE_PIPELINE, label="test"):
    return WorkloadSpec(label=label, items=make_items(sizes), pipeline=pipeline)


@pytest.fixture
def gpu_node_cluster():
    """Four nodes shaped like the reference GPU nodes."""
    return ClusterSpec(n_nodes=4, cpus_per_node=32, gpus_per_node=2,
                       mem_per_node_mb=128000.0)


@pytest.fixture
def two_node_cluster():
    return ClusterSpec(n_nodes=2, cpus_per_node=32, gpus_per_node=2,
                       mem_per_node_mb=128000.0)


@pytest.fixture
def flat_models():
    """Constant 1 s stage durations, no noise; makespans become countable."""
    return {
        Stage.FIRST: PerfModel(alpha=0.0, beta=1.0, noise_sigma=0.0, floor_s=0.01),
        Stage.SECOND: PerfModel(alpha=0.0, beta=1.0, noise_sigma=0.0, floor_s=0.01),
    }


@pytest.fixture
def no_overheads():
    return OverheadConfig()
