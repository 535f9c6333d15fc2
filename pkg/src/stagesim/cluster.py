"""Homogeneous cluster model and per-node resource accounting.

Nodes expose CPU cores, GPUs, and memory. Placement is all-or-nothing: a task
either fits a node's free capacity or it does not. Worker sizing for the
queue-based designs derives from the same feasibility test, never from
hard-coded concurrency numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError, PlacementError
from .workload import Stage, TaskSpec, WorkloadSpec


@dataclass(frozen=True)
class ClusterSpec:
    n_nodes: int
    cpus_per_node: int
    gpus_per_node: int
    mem_per_node_mb: float

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigurationError("cluster needs at least one node")
        if self.cpus_per_node < 1:
            raise ConfigurationError("nodes need at least one CPU core")
        if self.gpus_per_node < 0:
            raise ConfigurationError("gpus_per_node must be >= 0")
        if self.gpus_per_node > self.cpus_per_node:
            raise ConfigurationError("gpus_per_node may not exceed cpus_per_node")
        if not (self.mem_per_node_mb > 0):
            raise ConfigurationError("mem_per_node_mb must be > 0")

    @property
    def total_cpus(self) -> int:
        return self.n_nodes * self.cpus_per_node

    @property
    def total_gpus(self) -> int:
        return self.n_nodes * self.gpus_per_node

    def fresh_nodes(self) -> list["NodeState"]:
        return [
            NodeState(
                node_id=i,
                cpus=self.cpus_per_node,
                gpus=self.gpus_per_node,
                mem_mb=self.mem_per_node_mb,
                free_cpus=self.cpus_per_node,
                free_gpus=self.gpus_per_node,
                free_mem_mb=self.mem_per_node_mb,
            )
            for i in range(self.n_nodes)
        ]

    def to_json(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "cpus_per_node": self.cpus_per_node,
            "gpus_per_node": self.gpus_per_node,
            "mem_per_node_mb": self.mem_per_node_mb,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ClusterSpec":
        return cls(
            n_nodes=doc["n_nodes"],
            cpus_per_node=doc["cpus_per_node"],
            gpus_per_node=doc["gpus_per_node"],
            mem_per_node_mb=doc["mem_per_node_mb"],
        )


@dataclass
class NodeState:
    """Mutable free-capacity view of one node plus the set of running task ids."""

    node_id: int
    cpus: int
    gpus: int
    mem_mb: float
    free_cpus: int
    free_gpus: int
    free_mem_mb: float
    running: set[str] = field(default_factory=set)


def can_place(node: NodeState, task: TaskSpec) -> bool:
    """All-or-nothing fit test against the node's current free capacity."""
    return (
        node.free_cpus >= task.cpu_cores
        and node.free_gpus >= task.gpus
        and node.free_mem_mb >= task.mem_mb
    )


def allocate(node: NodeState, task: TaskSpec, task_id: str) -> None:
    if task_id in node.running:
        raise PlacementError(f"task {task_id!r} already running on node {node.node_id}")
    if not can_place(node, task):
        raise PlacementError(
            f"task {task_id!r} does not fit node {node.node_id} "
            f"(free {node.free_cpus}c/{node.free_gpus}g/{node.free_mem_mb}MB, "
            f"demand {task.cpu_cores}c/{task.gpus}g/{task.mem_mb}MB)"
        )
    node.free_cpus -= task.cpu_cores
    node.free_gpus -= task.gpus
    node.free_mem_mb -= task.mem_mb
    node.running.add(task_id)


def release(node: NodeState, task: TaskSpec, task_id: str) -> None:
    if task_id not in node.running:
        raise PlacementError(f"task {task_id!r} not running on node {node.node_id}")
    node.running.discard(task_id)
    node.free_cpus += task.cpu_cores
    node.free_gpus += task.gpus
    node.free_mem_mb += task.mem_mb


def worker_counts(spec: ClusterSpec, workload: WorkloadSpec) -> tuple[int, int]:
    """Max (stage1, stage2) workers that fit one node concurrently.

    Stage-1 workers are sized first on an empty node, then stage-2 workers on
    whatever capacity remains; the two pools coexist for the whole run in the
    queue-based designs. Demands bound the loop because every task claims at
    least one core or GPU.
    """
    probe = spec.fresh_nodes()[0]
    t1, t2 = workload.task(Stage.FIRST), workload.task(Stage.SECOND)
    k1 = 0
    while can_place(probe, t1):
        allocate(probe, t1, f"probe.s1.{k1}")
        k1 += 1
    k2 = 0
    while can_place(probe, t2):
        allocate(probe, t2, f"probe.s2.{k2}")
        k2 += 1
    return k1, k2
